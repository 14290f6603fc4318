#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textshift/corpus.hpp"
#include "textshift/embeddings.hpp"
#include "textshift/matrix.hpp"
#include "textshift/rng.hpp"

namespace textshift {

struct CnnConfig {
  std::size_t embed_dim = 300;
  std::vector<std::size_t> filter_widths{2, 3, 4};
  std::size_t filters_per_width = 50;
  double dropout = 0.5;  // drop probability p
  double norm_cap = 10.0;
  double init_range = kEmbeddingInitRange;

  std::size_t num_features() const { return filter_widths.size() * filters_per_width; }
  std::size_t max_width() const;
  void validate() const;

  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

/// One convolution filter over a window of `width` words; `weights` holds
/// width * k values laid out row by row like the window itself.
struct ConvFilter {
  std::size_t width = 1;
  std::vector<double> weights;
  double bias = 0.0;

  friend bool operator==(const ConvFilter&, const ConvFilter&) = default;
};

enum class Mode { Train, Test };

class CnnModel {
 public:
  CnnModel() = default;
  /// Builds a model with the given embeddings and seeded random filters and
  /// dense weights (biases start at zero).
  CnnModel(LabelSet labels, Vocabulary vocab, CnnConfig config, EmbeddingMatrix embeddings,
           std::uint64_t seed);

  LabelSet labels;
  Vocabulary vocab;
  CnnConfig config;
  EmbeddingMatrix embeddings;
  std::vector<ConvFilter> filters;  // grouped by width, in config order
  Matrix dense;                     // C x F
  std::vector<double> dense_bias;   // C
  Mode mode = Mode::Test;

  std::size_t num_classes() const noexcept { return dense.rows(); }
  std::size_t num_features() const noexcept { return filters.size(); }
  std::size_t embed_dim() const noexcept { return embeddings.dim(); }
  std::size_t max_width() const;

  /// Views over every trainable block: embeddings (when trainable), then
  /// each filter's weights and bias, then dense weights and dense bias.
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// Sentence as stacked embedding rows, padded to at least the widest filter.
struct SentenceMatrix {
  Matrix rows;                       // n x k
  std::vector<std::size_t> indices;  // vocabulary index per row; PAD for padding
};

std::vector<std::size_t> encode_tokens(const Vocabulary& vocab,
                                       const std::vector<std::string>& tokens);

SentenceMatrix embed_sentence(std::span<const std::size_t> indices, const EmbeddingMatrix& E,
                              std::size_t h_max);
SentenceMatrix embed_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                              const EmbeddingMatrix& E, std::size_t h_max);

/// c_i = tanh(w . x_{i:i+h-1} + b) for each of the n-h+1 windows.
std::vector<double> conv_feature_map(const SentenceMatrix& sentence, const ConvFilter& filter);

struct PoolResult {
  double value;
  std::size_t argmax;  // smallest index attaining the maximum
};

PoolResult max_pool(std::span<const double> c);

struct ForwardCache {
  Mode mode = Mode::Test;
  SentenceMatrix sentence;
  std::vector<std::vector<double>> feature_maps;
  std::vector<std::size_t> argmax;
  std::vector<double> pooled;      // z, length F
  std::vector<std::uint8_t> mask;  // empty in test mode
  std::vector<double> logits;
  std::vector<double> probabilities;
};

/// Bernoulli mask keeping each pooled feature with probability 1 - p.
std::vector<std::uint8_t> sample_dropout_mask(const CnnModel& model, Rng& rng);

/// Train mode applies `mask` (required) to z. Test mode takes no mask and
/// scales the dense weights by the keep probability 1 - p.
ForwardCache forward(const CnnModel& model, std::span<const std::size_t> indices, Mode mode,
                     std::span<const std::uint8_t> mask = {});
ForwardCache forward(const CnnModel& model, const std::vector<std::string>& tokens,
                     std::span<const std::uint8_t> mask = {});

/// Test-mode class distribution.
std::vector<double> predict_proba(const CnnModel& model, std::span<const std::size_t> indices);

/// Pooled features z, always computed as the test-mode first layer.
std::vector<double> pooled_features(const CnnModel& model, std::span<const std::size_t> indices);

std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kProbabilityFloor = 1e-12;

double cross_entropy_loss(std::span<const double> probabilities, std::size_t label);

/// Gradient buffers shaped like the model's trainable blocks.
struct CnnGradients {
  Matrix embeddings;
  std::vector<std::vector<double>> filter_weights;
  std::vector<double> filter_bias;
  Matrix dense;
  std::vector<double> dense_bias;
  bool embeddings_trainable = true;

  static CnnGradients zeros_like(const CnnModel& model);
  void clear();
  CnnGradients& operator+=(const CnnGradients& other);
  void scale(double factor);
  /// Same order as CnnModel::parameter_blocks.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

/// Adds the cross-entropy gradient for `label` into `grads`. The max-pool
/// routes to the recorded argmax window, masked features pass nothing, and
/// the PAD embedding row never receives gradient.
void backward(const CnnModel& model, const ForwardCache& cache, std::size_t label,
              CnnGradients& grads);
CnnGradients backward(const CnnModel& model, const ForwardCache& cache, std::size_t label);

/// Rescales every dense row whose L2 norm exceeds `cap` back to norm `cap`.
void renorm_dense_rows(CnnModel& model, double cap);

}  // namespace textshift
