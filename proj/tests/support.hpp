#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "textshift/cnn_model.hpp"
#include "textshift/corpus.hpp"
#include "textshift/embeddings.hpp"
#include "textshift/fasttext.hpp"
#include "textshift/rng.hpp"

namespace testing {

using namespace textshift;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("textshift-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LabelSet numbered_labels(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
  return LabelSet(names);
}

inline Vocabulary numbered_vocab(std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("v" + std::to_string(i));
  return Vocabulary(tokens);
}

struct TinyCnnCase {
  CnnModel model;
  std::vector<std::size_t> indices;
  std::vector<std::uint8_t> mask;
  std::size_t label = 0;
};

// k in {2,3}, widths a non-empty subset of {2,3}, at most 3 filters,
// C in {2,3}, 1..6 tokens (UNK allowed, PAD never).
inline TinyCnnCase random_tiny_cnn(Rng& rng) {
  CnnConfig config;
  config.embed_dim = 2 + rng.index(2);
  const auto subset = rng.index(3);
  config.filter_widths = subset == 0 ? std::vector<std::size_t>{2}
                         : subset == 1 ? std::vector<std::size_t>{3}
                                       : std::vector<std::size_t>{2, 3};
  config.filters_per_width = config.filter_widths.size() == 1 ? 1 + rng.index(3) : 1;
  config.dropout = 0.5;
  const std::size_t classes = 2 + rng.index(2);
  const auto vocab = numbered_vocab(4);
  auto embeddings = init_embeddings(vocab, nullptr, config.embed_dim, rng.next_u64(), 0.8);
  TinyCnnCase out;
  out.model = CnnModel(numbered_labels(classes), vocab, config, std::move(embeddings), rng.next_u64());
  for (auto& f : out.model.filters) {
    for (auto& w : f.weights) w = rng.uniform(-0.8, 0.8);
    f.bias = rng.uniform(-0.3, 0.3);
  }
  for (auto& w : out.model.dense.values()) w = rng.uniform(-1.0, 1.0);
  for (auto& b : out.model.dense_bias) b = rng.uniform(-0.5, 0.5);
  const std::size_t n = 1 + rng.index(6);
  for (std::size_t i = 0; i < n; ++i) out.indices.push_back(1 + rng.index(vocab.size() - 1));
  out.mask.resize(out.model.num_features());
  for (auto& m : out.mask) m = rng.bernoulli(0.5) ? 1 : 0;
  out.label = rng.index(classes);
  return out;
}

// Logits by direct summation over windows, written independently of the
// library's convolution and dense code.
inline std::vector<double> cnn_logits_oracle(const CnnModel& model,
                                             const std::vector<std::size_t>& indices,
                                             const std::vector<std::uint8_t>* mask) {
  const std::size_t k = model.embed_dim();
  std::size_t h_max = 0;
  for (const auto& f : model.filters) h_max = std::max(h_max, f.width);
  std::vector<std::size_t> rows = indices;
  while (rows.size() < h_max) rows.push_back(kPadIndex);

  std::vector<double> z;
  for (const auto& f : model.filters) {
    double best = -1e300;
    for (std::size_t start = 0; start + f.width <= rows.size(); ++start) {
      double sum = f.bias;
      for (std::size_t r = 0; r < f.width; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          sum += f.weights[r * k + j] * model.embeddings.values(rows[start + r], j);
        }
      }
      best = std::max(best, std::tanh(sum));
    }
    z.push_back(best);
  }
  const double scale = mask ? 1.0 : 1.0 - model.config.dropout;
  std::vector<double> logits;
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    double sum = model.dense_bias[c];
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double kept = mask ? ((*mask)[j] ? z[j] : 0.0) : z[j];
      sum += scale * model.dense(c, j) * kept;
    }
    logits.push_back(sum);
  }
  return logits;
}

inline std::uint64_t fnv1a64_oracle(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::vector<double> ft_logits_oracle(const FastTextModel& model,
                                            const std::vector<std::string>& tokens) {
  const std::size_t d = model.config.dim;
  std::vector<double> sum(d, 0.0);
  std::size_t count = 0;
  for (const auto& t : tokens) {
    const auto row = model.vocab.index(t);
    for (std::size_t j = 0; j < d; ++j) sum[j] += model.word_table(row, j);
    ++count;
  }
  for (std::size_t n = 2; n <= model.config.max_ngram; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string joined;
      for (std::size_t r = 0; r < n; ++r) {
        if (r > 0) joined.push_back('\x1f');
        joined += tokens[i + r];
      }
      const auto bucket = fnv1a64_oracle(joined) % model.config.buckets;
      for (std::size_t j = 0; j < d; ++j) sum[j] += model.ngram_table(bucket, j);
      ++count;
    }
  }
  std::vector<double> logits;
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    double v = model.output_bias[c];
    for (std::size_t j = 0; j < d; ++j) v += model.output(c, j) * (sum[j] / static_cast<double>(count));
    logits.push_back(v);
  }
  return logits;
}

// Gradient checks compare |analytic - numeric| against this fraction of the
// larger magnitude, floored so gradients near zero are judged absolutely.
inline constexpr double kGradStep = 1e-5;
inline constexpr double kGradRelFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradRelFloor});
  return std::abs(analytic - numeric) / scale;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool pad_row_zero = true;
};

inline GradCheck check_cnn_gradients(TinyCnnCase c) {
  CnnModel& model = c.model;
  auto loss = [&] {
    const auto cache = forward(model, c.indices, Mode::Train, c.mask);
    return cross_entropy_loss(cache.probabilities, c.label);
  };
  const auto analytic = backward(model, forward(model, c.indices, Mode::Train, c.mask), c.label);
  const auto grad_blocks = analytic.blocks();
  auto params = model.parameter_blocks();
  GradCheck out;
  const std::size_t k = model.embed_dim();
  for (std::size_t b = 0; b < params.size(); ++b) {
    const bool is_embedding = model.embeddings.trainable && b == 0;
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      if (is_embedding && i / k == kPadIndex) {
        if (grad_blocks[b][i] != 0.0) out.pad_row_zero = false;
        continue;
      }
      const double saved = params[b][i];
      params[b][i] = saved + kGradStep;
      const double up = loss();
      params[b][i] = saved - kGradStep;
      const double down = loss();
      params[b][i] = saved;
      const double numeric = (up - down) / (2.0 * kGradStep);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(grad_blocks[b][i], numeric));
      ++out.checked;
    }
  }
  return out;
}

inline FastTextModel random_tiny_fasttext(Rng& rng, std::vector<std::string>& doc) {
  FastTextConfig config;
  config.dim = 2 + rng.index(4);
  config.max_ngram = 2 + rng.index(3);
  config.buckets = 7 + rng.index(20);
  const std::size_t classes = 2 + rng.index(3);
  FastTextModel model(numbered_labels(classes), numbered_vocab(5), config, rng.next_u64());
  for (auto& w : model.output.values()) w = rng.uniform(-1.0, 1.0);
  for (auto& b : model.output_bias) b = rng.uniform(-0.5, 0.5);
  doc.clear();
  const std::size_t n = 1 + rng.index(8);
  for (std::size_t i = 0; i < n; ++i) {
    // includes one token the vocabulary does not know
    doc.push_back("v" + std::to_string(rng.index(6)));
  }
  return model;
}

}  // namespace testing
