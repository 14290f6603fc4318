#include "textshift/fasttext.hpp"

#include <numeric>

#include "textshift/cnn_model.hpp"
#include "textshift/error.hpp"
#include "textshift/rng.hpp"

namespace textshift {

void FastTextConfig::validate() const {
  if (dim == 0) throw Error(ErrorCode::InvalidConfig, "fasttext dim must be positive");
  if (max_ngram == 0) throw Error(ErrorCode::InvalidConfig, "max_ngram must be >= 1");
  if (buckets == 0) throw Error(ErrorCode::InvalidConfig, "buckets must be >= 1");
}

FastTextModel::FastTextModel(LabelSet labels_in, Vocabulary vocab_in, FastTextConfig config_in,
                             std::uint64_t seed)
    : labels(std::move(labels_in)), vocab(std::move(vocab_in)), config(config_in) {
  config.validate();
  const std::size_t d = config.dim;
  word_table = Matrix(vocab.size(), d);
  ngram_table = Matrix(config.max_ngram >= 2 ? config.buckets : 0, d);
  output = Matrix(labels.size(), d);
  output_bias.assign(labels.size(), 0.0);
  Rng rng(seed);
  const double bound = 1.0 / static_cast<double>(d);
  for (std::size_t r = 1; r < word_table.rows(); ++r) {
    for (auto& v : word_table.row(r)) v = rng.uniform(-bound, bound);
  }
  for (auto& v : ngram_table.values()) v = rng.uniform(-bound, bound);
}

std::vector<std::span<double>> FastTextModel::parameter_blocks() {
  return {word_table.values(), ngram_table.values(), output.values(), output_bias};
}

std::vector<std::span<const double>> FastTextModel::parameter_blocks() const {
  return {word_table.values(), ngram_table.values(), output.values(), output_bias};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::vector<std::size_t> extract_ngrams(const std::vector<std::string>& tokens,
                                        std::size_t max_ngram, std::size_t buckets) {
  if (buckets == 0) throw Error(ErrorCode::InvalidConfig, "buckets must be >= 1");
  std::vector<std::size_t> ids;
  for (std::size_t n = 2; n <= max_ngram; ++n) {
    if (n > tokens.size()) break;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string joined = tokens[i];
      for (std::size_t j = 1; j < n; ++j) {
        joined += '\x1f';
        joined += tokens[i + j];
      }
      ids.push_back(static_cast<std::size_t>(fnv1a64(joined) % buckets));
    }
  }
  return ids;
}

FtInput ft_encode(const FastTextModel& model, const std::vector<std::string>& tokens) {
  FtInput input;
  input.words = encode_tokens(model.vocab, tokens);
  if (model.config.max_ngram >= 2) {
    input.ngrams = extract_ngrams(tokens, model.config.max_ngram, model.config.buckets);
  }
  return input;
}

std::vector<double> ft_hidden(const FastTextModel& model, const FtInput& input) {
  if (input.count() == 0) throw Error(ErrorCode::EmptyDocument, "document has no tokens");
  const std::size_t d = model.config.dim;
  std::vector<double> hidden(d, 0.0);
  auto add = [&](std::span<const double> row) {
    for (std::size_t j = 0; j < d; ++j) hidden[j] += row[j];
  };
  for (auto w : input.words) add(model.word_table.row(w));
  for (auto g : input.ngrams) add(model.ngram_table.row(g));
  const double inv = 1.0 / static_cast<double>(input.count());
  for (auto& h : hidden) h *= inv;
  return hidden;
}

std::vector<double> ft_logits(const FastTextModel& model, const FtInput& input) {
  const auto hidden = ft_hidden(model, input);
  std::vector<double> logits(model.num_classes());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    auto w = model.output.row(c);
    double acc = model.output_bias[c];
    for (std::size_t j = 0; j < hidden.size(); ++j) acc += w[j] * hidden[j];
    logits[c] = acc;
  }
  return logits;
}

std::vector<double> ft_forward(const FastTextModel& model, const FtInput& input) {
  return softmax(ft_logits(model, input));
}

std::vector<double> ft_forward(const FastTextModel& model, const std::vector<std::string>& tokens) {
  return ft_forward(model, ft_encode(model, tokens));
}

FtGradients ft_gradients(const FastTextModel& model, const FtInput& input, std::size_t label) {
  if (label >= model.num_classes()) throw Error(ErrorCode::ShapeMismatch, "label out of range");
  const auto hidden = ft_hidden(model, input);
  const std::size_t C = model.num_classes();
  const std::size_t d = model.config.dim;
  std::vector<double> logits(C);
  for (std::size_t c = 0; c < C; ++c) {
    auto w = model.output.row(c);
    double acc = model.output_bias[c];
    for (std::size_t j = 0; j < d; ++j) acc += w[j] * hidden[j];
    logits[c] = acc;
  }
  auto probs = softmax(logits);

  FtGradients g{Matrix(C, d), std::vector<double>(C), std::vector<double>(d, 0.0),
                cross_entropy_loss(probs, label)};
  for (std::size_t c = 0; c < C; ++c) {
    const double delta = probs[c] - (c == label ? 1.0 : 0.0);
    g.output_bias[c] = delta;
    auto out_row = g.output.row(c);
    auto w = model.output.row(c);
    for (std::size_t j = 0; j < d; ++j) {
      out_row[j] = delta * hidden[j];
      g.hidden[j] += delta * w[j];
    }
  }
  return g;
}

void ft_train(FastTextModel& model, const Corpus& corpus, const FtTrainOptions& options,
              const std::function<void(const FtEpochStats&)>& on_epoch) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "training corpus is empty");
  std::vector<FtInput> inputs;
  inputs.reserve(corpus.size());
  for (const auto& doc : corpus.documents) inputs.push_back(ft_encode(model, doc.tokens));

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.shuffle(order);

  const double total = static_cast<double>(options.epochs * corpus.size());
  std::size_t processed = 0;
  const std::size_t d = model.config.dim;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (auto i : order) {
      const double lr = options.lr0 * (1.0 - static_cast<double>(processed) / total);
      ++processed;
      const auto& input = inputs[i];
      const auto g = ft_gradients(model, input, corpus.documents[i].label);
      loss_sum += g.loss;
      if (lr == 0.0) continue;
      auto out = model.output.values();
      auto gout = g.output.values();
      for (std::size_t j = 0; j < out.size(); ++j) out[j] -= lr * gout[j];
      for (std::size_t c = 0; c < model.output_bias.size(); ++c) {
        model.output_bias[c] -= lr * g.output_bias[c];
      }
      const double row_scale = lr / static_cast<double>(input.count());
      for (auto w : input.words) {
        auto row = model.word_table.row(w);
        for (std::size_t j = 0; j < d; ++j) row[j] -= row_scale * g.hidden[j];
      }
      for (auto b : input.ngrams) {
        auto row = model.ngram_table.row(b);
        for (std::size_t j = 0; j < d; ++j) row[j] -= row_scale * g.hidden[j];
      }
    }
    if (on_epoch) on_epoch({epoch, loss_sum / static_cast<double>(corpus.size())});
  }
}

}  // namespace textshift
