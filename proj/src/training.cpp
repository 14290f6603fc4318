#include "textshift/training.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "textshift/error.hpp"
#include "textshift/rng.hpp"

namespace textshift {

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (max_epochs == 0) fail("max_epochs must be >= 1");
  if (patience == 0) fail("patience must be >= 1");
  if (threads == 0) fail("threads must be >= 1");
  if (optimizer.kind == OptimizerKind::Adadelta) {
    if (!(optimizer.rho > 0.0 && optimizer.rho < 1.0)) fail("rho must lie in (0, 1)");
    if (!(optimizer.epsilon > 0.0)) fail("epsilon must be positive");
  } else if (!(optimizer.learning_rate >= 0.0)) {
    fail("learning_rate must be non-negative");
  }
}

bool EarlyStopping::update(double val_accuracy) {
  const bool improved = seen_ == 0 || val_accuracy > best_;
  if (improved) {
    best_ = val_accuracy;
    best_index_ = seen_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  ++seen_;
  return improved;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(count, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

void check_corpus(const Corpus& corpus, std::size_t classes, const char* what) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, std::string(what) + " corpus is empty");
  for (const auto& doc : corpus.documents) {
    if (doc.label >= classes) {
      throw Error(ErrorCode::UnknownLabel,
                  std::string(what) + " document '" + doc.id + "' has a label outside the model");
    }
  }
}

std::vector<std::vector<std::size_t>> encode_corpus(const Vocabulary& vocab, const Corpus& corpus) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus.documents) out.push_back(encode_tokens(vocab, doc.tokens));
  return out;
}

std::vector<std::size_t> labels_of(const Corpus& corpus) {
  std::vector<std::size_t> labels;
  labels.reserve(corpus.size());
  for (const auto& doc : corpus.documents) labels.push_back(doc.label);
  return labels;
}

double accuracy_of(const CnnModel& model, const std::vector<std::vector<std::size_t>>& encoded,
                   const std::vector<std::size_t>& truth, std::size_t threads) {
  std::vector<std::size_t> predicted(encoded.size());
  parallel_for(encoded.size(), threads,
               [&](std::size_t i) { predicted[i] = argmax(predict_proba(model, encoded[i])); });
  return summarize_predictions(truth, predicted, model.num_classes()).accuracy;
}

}  // namespace

CnnTrainResult train_cnn(const CnnModel& initial, const Corpus& train, const Corpus& val,
                         const TrainConfig& config, const EpochCallback& on_epoch,
                         const std::function<void(const CnnModel&)>& after_step) {
  config.validate();
  check_corpus(train, initial.num_classes(), "training");
  check_corpus(val, initial.num_classes(), "validation");

  CnnModel model = initial;
  model.mode = Mode::Train;
  const auto train_encoded = encode_corpus(model.vocab, train);
  const auto val_encoded = encode_corpus(model.vocab, val);
  const auto train_truth = labels_of(train);
  const auto val_truth = labels_of(val);

  OptimizerState optimizer = OptimizerState::for_blocks(config.optimizer, model.parameter_blocks());
  const bool serial = config.deterministic || config.threads <= 1;
  const std::size_t workers = serial ? 1 : config.threads;
  std::vector<CnnGradients> partial(workers, CnnGradients::zeros_like(model));
  std::vector<double> partial_loss(workers);

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  CnnTrainResult result;
  EarlyStopping stopper(config.patience);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t batch = end - start;
      std::vector<std::vector<std::uint8_t>> masks;
      masks.reserve(batch);
      for (std::size_t i = 0; i < batch; ++i) masks.push_back(sample_dropout_mask(model, rng));

      const std::size_t used = std::min(workers, batch);
      const std::size_t chunk = (batch + used - 1) / used;
      parallel_for(used, used, [&](std::size_t w) {
        auto& grads = partial[w];
        grads.clear();
        partial_loss[w] = 0.0;
        for (std::size_t i = w * chunk; i < std::min(batch, (w + 1) * chunk); ++i) {
          const std::size_t doc = order[start + i];
          const auto cache = forward(model, train_encoded[doc], Mode::Train, masks[i]);
          partial_loss[w] += cross_entropy_loss(cache.probabilities, train_truth[doc]);
          backward(model, cache, train_truth[doc], grads);
        }
      });
      for (std::size_t w = 1; w < used; ++w) partial[0] += partial[w];
      for (std::size_t w = 0; w < used; ++w) loss_sum += partial_loss[w];
      partial[0].scale(1.0 / static_cast<double>(batch));

      optimizer.step(model.parameter_blocks(), partial[0].blocks());
      renorm_dense_rows(model, model.config.norm_cap);
      if (after_step) after_step(model);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    record.train_accuracy = accuracy_of(model, train_encoded, train_truth, config.threads);
    record.val_accuracy = accuracy_of(model, val_encoded, val_truth, config.threads);
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (stopper.update(record.val_accuracy)) {
      result.model = model;
      result.optimizer = optimizer;
    }
    if (stopper.should_stop()) break;
  }
  result.history.selected = stopper.best_index();
  result.model.mode = Mode::Test;
  return result;
}

FastTextTrainResult train_fasttext(const FastTextModel& initial, const Corpus& train,
                                   const Corpus& val, const FtTrainOptions& options,
                                   const EpochCallback& on_epoch) {
  check_corpus(train, initial.num_classes(), "training");
  check_corpus(val, initial.num_classes(), "validation");
  FastTextModel model = initial;
  FastTextTrainResult result;
  EarlyStopping best(options.epochs + 1);
  ft_train(model, train, options, [&](const FtEpochStats& stats) {
    EpochRecord record;
    record.epoch = stats.epoch + 1;
    record.train_loss = stats.mean_loss;
    record.train_accuracy = evaluate(model, train).accuracy;
    record.val_accuracy = evaluate(model, val).accuracy;
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (best.update(record.val_accuracy)) result.model = model;
  });
  if (result.history.epochs.empty()) result.model = model;
  result.history.selected = best.best_index();
  return result;
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes; ++c) t += at(truth, c);
  return t;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Evaluation summarize_predictions(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCode::ShapeMismatch, "truth and prediction counts differ");
  }
  Evaluation e;
  e.confusion = ConfusionMatrix(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) {
      throw Error(ErrorCode::ShapeMismatch, "class index out of range");
    }
    ++e.confusion.at(truth[i], predicted[i]);
  }
  const std::size_t total = e.confusion.total();
  e.accuracy = total == 0 ? 0.0
                          : static_cast<double>(e.confusion.trace()) / static_cast<double>(total);
  e.recall.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t row = e.confusion.row_total(c);
    e.recall[c] = row == 0 ? 0.0
                           : static_cast<double>(e.confusion.at(c, c)) / static_cast<double>(row);
  }
  e.predictions.assign(predicted.begin(), predicted.end());
  return e;
}

const LabelSet& model_labels(const AnyModel& model) {
  return std::visit([](const auto& m) -> const LabelSet& { return m.labels; }, model);
}

std::vector<double> predict_proba(const AnyModel& model, const std::vector<std::string>& tokens) {
  if (const auto* cnn = std::get_if<CnnModel>(&model)) {
    return predict_proba(*cnn, encode_tokens(cnn->vocab, tokens));
  }
  return ft_forward(std::get<FastTextModel>(model), tokens);
}

namespace {

template <class Predict>
Evaluation evaluate_with(const Corpus& corpus, std::size_t classes, std::size_t threads,
                         Predict&& predict) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "evaluation corpus is empty");
  std::vector<std::size_t> predicted(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    predicted[i] = argmax(predict(corpus.documents[i].tokens));
  });
  return summarize_predictions(labels_of(corpus), predicted, classes);
}

}  // namespace

Evaluation evaluate(const CnnModel& model, const Corpus& corpus, std::size_t threads) {
  return evaluate_with(corpus, model.num_classes(), threads, [&](const auto& tokens) {
    return predict_proba(model, encode_tokens(model.vocab, tokens));
  });
}

Evaluation evaluate(const FastTextModel& model, const Corpus& corpus, std::size_t threads) {
  return evaluate_with(corpus, model.num_classes(), threads,
                       [&](const auto& tokens) { return ft_forward(model, tokens); });
}

Evaluation evaluate(const AnyModel& model, const Corpus& corpus, std::size_t threads) {
  return std::visit([&](const auto& m) { return evaluate(m, corpus, threads); }, model);
}

}  // namespace textshift
