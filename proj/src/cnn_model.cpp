#include "textshift/cnn_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "textshift/error.hpp"

namespace textshift {

std::size_t CnnConfig::max_width() const {
  return filter_widths.empty() ? 0 : *std::max_element(filter_widths.begin(), filter_widths.end());
}

void CnnConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (filter_widths.empty()) fail("at least one filter width is required");
  for (auto w : filter_widths) {
    if (w == 0) fail("filter widths must be >= 1");
  }
  if (filters_per_width == 0) fail("filters_per_width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(norm_cap > 0.0)) fail("norm_cap must be positive");
  if (!(init_range >= 0.0)) fail("init_range must be non-negative");
}

CnnModel::CnnModel(LabelSet labels_in, Vocabulary vocab_in, CnnConfig config_in,
                   EmbeddingMatrix embeddings_in, std::uint64_t seed)
    : labels(std::move(labels_in)),
      vocab(std::move(vocab_in)),
      config(std::move(config_in)),
      embeddings(std::move(embeddings_in)) {
  config.validate();
  if (embeddings.values.rows() != vocab.size() || embeddings.dim() != config.embed_dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedding matrix does not match vocab x embed_dim");
  }
  Rng rng(seed);
  const std::size_t k = config.embed_dim;
  for (auto width : config.filter_widths) {
    const double fan_in = static_cast<double>(width * k);
    const double bound = std::sqrt(6.0 / (fan_in + static_cast<double>(config.filters_per_width)));
    for (std::size_t f = 0; f < config.filters_per_width; ++f) {
      ConvFilter filter{width, std::vector<double>(width * k), 0.0};
      for (auto& w : filter.weights) w = rng.uniform(-bound, bound);
      filters.push_back(std::move(filter));
    }
  }
  const std::size_t F = filters.size();
  const std::size_t C = labels.size();
  dense = Matrix(C, F);
  const double bound = std::sqrt(6.0 / static_cast<double>(F + C));
  for (auto& w : dense.values()) w = rng.uniform(-bound, bound);
  dense_bias.assign(C, 0.0);
}

std::size_t CnnModel::max_width() const {
  std::size_t h = 0;
  for (const auto& f : filters) h = std::max(h, f.width);
  return h;
}

std::vector<std::span<double>> CnnModel::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  if (embeddings.trainable) blocks.push_back(embeddings.values.values());
  for (auto& f : filters) {
    blocks.emplace_back(f.weights);
    blocks.emplace_back(&f.bias, 1);
  }
  blocks.push_back(dense.values());
  blocks.emplace_back(dense_bias);
  return blocks;
}

std::vector<std::span<const double>> CnnModel::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  if (embeddings.trainable) blocks.push_back(embeddings.values.values());
  for (const auto& f : filters) {
    blocks.emplace_back(f.weights);
    blocks.emplace_back(&f.bias, 1);
  }
  blocks.push_back(dense.values());
  blocks.emplace_back(dense_bias);
  return blocks;
}

std::vector<std::size_t> encode_tokens(const Vocabulary& vocab,
                                       const std::vector<std::string>& tokens) {
  std::vector<std::size_t> indices;
  indices.reserve(tokens.size());
  for (const auto& t : tokens) indices.push_back(vocab.index(t));
  return indices;
}

SentenceMatrix embed_sentence(std::span<const std::size_t> indices, const EmbeddingMatrix& E,
                              std::size_t h_max) {
  if (indices.empty()) throw Error(ErrorCode::EmptySentence, "no tokens to embed");
  const std::size_t n = std::max(indices.size(), h_max);
  const std::size_t k = E.dim();
  SentenceMatrix s{Matrix(n, k), std::vector<std::size_t>(n, kPadIndex)};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= E.values.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "token index outside embedding table");
    }
    s.indices[i] = indices[i];
    auto src = E.values.row(indices[i]);
    std::copy(src.begin(), src.end(), s.rows.row(i).begin());
  }
  return s;
}

SentenceMatrix embed_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                              const EmbeddingMatrix& E, std::size_t h_max) {
  const auto indices = encode_tokens(vocab, tokens);
  return embed_sentence(indices, E, h_max);
}

std::vector<double> conv_feature_map(const SentenceMatrix& sentence, const ConvFilter& filter) {
  const std::size_t n = sentence.rows.rows();
  const std::size_t k = sentence.rows.cols();
  if (filter.width == 0 || filter.width > n) {
    throw Error(ErrorCode::WindowTooLarge, "filter width " + std::to_string(filter.width) +
                                               " exceeds sentence length " + std::to_string(n));
  }
  if (filter.weights.size() != filter.width * k) {
    throw Error(ErrorCode::ShapeMismatch, "filter weights do not match width x k");
  }
  const std::size_t span = filter.width * k;
  const double* data = sentence.rows.values().data();
  std::vector<double> c(n - filter.width + 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    // Rows i..i+h-1 are contiguous in row-major storage.
    const double* window = data + i * k;
    double acc = filter.bias;
    for (std::size_t j = 0; j < span; ++j) acc += filter.weights[j] * window[j];
    c[i] = std::tanh(acc);
  }
  return c;
}

PoolResult max_pool(std::span<const double> c) {
  if (c.empty()) throw Error(ErrorCode::EmptyFeatureMap, "cannot pool an empty feature map");
  PoolResult best{c[0], 0};
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i] > best.value) best = {c[i], i};
  }
  return best;
}

std::vector<std::uint8_t> sample_dropout_mask(const CnnModel& model, Rng& rng) {
  const double keep = 1.0 - model.config.dropout;
  std::vector<std::uint8_t> mask(model.num_features());
  for (auto& m : mask) m = rng.bernoulli(keep) ? 1 : 0;
  return mask;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

namespace {

// Sum whose result does not depend on the order of `terms`: the terms are
// sorted first. Keeps logits bit-identical under filter permutations.
double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}

void compute_pooled(const CnnModel& model, ForwardCache& cache) {
  const std::size_t F = model.num_features();
  cache.feature_maps.resize(F);
  cache.argmax.resize(F);
  cache.pooled.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    cache.feature_maps[f] = conv_feature_map(cache.sentence, model.filters[f]);
    const auto pooled = max_pool(cache.feature_maps[f]);
    cache.argmax[f] = pooled.argmax;
    cache.pooled[f] = pooled.value;
  }
}

}  // namespace

ForwardCache forward(const CnnModel& model, std::span<const std::size_t> indices, Mode mode,
                     std::span<const std::uint8_t> mask) {
  const std::size_t F = model.num_features();
  const std::size_t C = model.num_classes();
  if (mode == Mode::Train && mask.size() != F) {
    throw Error(ErrorCode::ShapeMismatch, "train mode needs a dropout mask of length F");
  }
  if (mode == Mode::Test && !mask.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "test mode takes no dropout mask");
  }
  ForwardCache cache;
  cache.mode = mode;
  cache.sentence = embed_sentence(indices, model.embeddings, model.max_width());
  compute_pooled(model, cache);

  std::vector<double> inputs = cache.pooled;
  double weight_scale = 1.0;
  if (mode == Mode::Train) {
    cache.mask.assign(mask.begin(), mask.end());
    for (std::size_t j = 0; j < F; ++j) {
      if (!cache.mask[j]) inputs[j] = 0.0;
    }
  } else {
    weight_scale = 1.0 - model.config.dropout;
  }

  cache.logits.resize(C);
  std::vector<double> terms(F);
  for (std::size_t c = 0; c < C; ++c) {
    auto w = model.dense.row(c);
    for (std::size_t j = 0; j < F; ++j) terms[j] = (weight_scale * w[j]) * inputs[j];
    cache.logits[c] = order_free_sum(terms) + model.dense_bias[c];
  }
  cache.probabilities = softmax(cache.logits);
  return cache;
}

ForwardCache forward(const CnnModel& model, const std::vector<std::string>& tokens,
                     std::span<const std::uint8_t> mask) {
  const auto indices = encode_tokens(model.vocab, tokens);
  return forward(model, indices, model.mode, mask);
}

std::vector<double> predict_proba(const CnnModel& model, std::span<const std::size_t> indices) {
  return forward(model, indices, Mode::Test).probabilities;
}

std::vector<double> pooled_features(const CnnModel& model, std::span<const std::size_t> indices) {
  ForwardCache cache;
  cache.sentence = embed_sentence(indices, model.embeddings, model.max_width());
  compute_pooled(model, cache);
  return cache.pooled;
}

double cross_entropy_loss(std::span<const double> probabilities, std::size_t label) {
  return -std::log(std::max(probabilities[label], kProbabilityFloor));
}

CnnGradients CnnGradients::zeros_like(const CnnModel& model) {
  CnnGradients g;
  g.embeddings_trainable = model.embeddings.trainable;
  if (g.embeddings_trainable) g.embeddings = Matrix(model.vocab.size(), model.embed_dim());
  for (const auto& f : model.filters) g.filter_weights.emplace_back(f.weights.size(), 0.0);
  g.filter_bias.assign(model.filters.size(), 0.0);
  g.dense = Matrix(model.dense.rows(), model.dense.cols());
  g.dense_bias.assign(model.dense_bias.size(), 0.0);
  return g;
}

void CnnGradients::clear() {
  for (auto block : blocks()) std::fill(block.begin(), block.end(), 0.0);
}

CnnGradients& CnnGradients::operator+=(const CnnGradients& other) {
  auto mine = blocks();
  auto theirs = other.blocks();
  if (mine.size() != theirs.size()) throw Error(ErrorCode::ShapeMismatch, "gradient layouts differ");
  for (std::size_t b = 0; b < mine.size(); ++b) {
    if (mine[b].size() != theirs[b].size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient layouts differ");
    }
    for (std::size_t i = 0; i < mine[b].size(); ++i) mine[b][i] += theirs[b][i];
  }
  return *this;
}

void CnnGradients::scale(double factor) {
  for (auto block : blocks()) {
    for (auto& v : block) v *= factor;
  }
}

std::vector<std::span<double>> CnnGradients::blocks() {
  std::vector<std::span<double>> out;
  if (embeddings_trainable) out.push_back(embeddings.values());
  for (std::size_t f = 0; f < filter_weights.size(); ++f) {
    out.emplace_back(filter_weights[f]);
    out.emplace_back(&filter_bias[f], 1);
  }
  out.push_back(dense.values());
  out.emplace_back(dense_bias);
  return out;
}

std::vector<std::span<const double>> CnnGradients::blocks() const {
  std::vector<std::span<const double>> out;
  if (embeddings_trainable) out.push_back(embeddings.values());
  for (std::size_t f = 0; f < filter_weights.size(); ++f) {
    out.emplace_back(filter_weights[f]);
    out.emplace_back(&filter_bias[f], 1);
  }
  out.push_back(dense.values());
  out.emplace_back(dense_bias);
  return out;
}

void backward(const CnnModel& model, const ForwardCache& cache, std::size_t label,
              CnnGradients& grads) {
  const std::size_t F = model.num_features();
  const std::size_t C = model.num_classes();
  const std::size_t k = model.embed_dim();
  if (cache.pooled.size() != F || cache.probabilities.size() != C ||
      cache.sentence.rows.cols() != k || grads.filter_weights.size() != F ||
      grads.dense.rows() != C || grads.dense.cols() != F ||
      (cache.mode == Mode::Train && cache.mask.size() != F)) {
    throw Error(ErrorCode::StaleCache, "cache or gradient buffers do not match the model");
  }
  if (label >= C) throw Error(ErrorCode::ShapeMismatch, "label outside class range");

  std::vector<double> dlogits(cache.probabilities);
  dlogits[label] -= 1.0;

  const bool train = cache.mode == Mode::Train;
  const double weight_scale = train ? 1.0 : 1.0 - model.config.dropout;

  // Dense layer.
  std::vector<double> inputs(cache.pooled);
  if (train) {
    for (std::size_t j = 0; j < F; ++j) {
      if (!cache.mask[j]) inputs[j] = 0.0;
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    auto g = grads.dense.row(c);
    for (std::size_t j = 0; j < F; ++j) g[j] += weight_scale * dlogits[c] * inputs[j];
    grads.dense_bias[c] += dlogits[c];
  }

  // Back through dropout, max-pool and tanh into the filters and sentence.
  const std::size_t n = cache.sentence.rows.rows();
  Matrix dsentence(n, k);
  const double* x = cache.sentence.rows.values().data();
  double* dx = dsentence.values().data();
  for (std::size_t f = 0; f < F; ++f) {
    if (train && !cache.mask[f]) continue;
    double dz = 0.0;
    for (std::size_t c = 0; c < C; ++c) dz += model.dense(c, f) * dlogits[c];
    dz *= weight_scale;
    const double z = cache.pooled[f];
    const double du = dz * (1.0 - z * z);
    if (du == 0.0) continue;
    const auto& filter = model.filters[f];
    const std::size_t offset = cache.argmax[f] * k;
    const std::size_t span = filter.width * k;
    auto& gw = grads.filter_weights[f];
    for (std::size_t j = 0; j < span; ++j) {
      gw[j] += du * x[offset + j];
      dx[offset + j] += du * filter.weights[j];
    }
    grads.filter_bias[f] += du;
  }

  if (grads.embeddings_trainable && model.embeddings.trainable) {
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t idx = cache.sentence.indices[r];
      if (idx == kPadIndex) continue;
      auto g = grads.embeddings.row(idx);
      auto d = dsentence.row(r);
      for (std::size_t j = 0; j < k; ++j) g[j] += d[j];
    }
  }
}

CnnGradients backward(const CnnModel& model, const ForwardCache& cache, std::size_t label) {
  auto grads = CnnGradients::zeros_like(model);
  backward(model, cache, label, grads);
  return grads;
}

void renorm_dense_rows(CnnModel& model, double cap) {
  if (!(cap > 0.0)) throw Error(ErrorCode::InvalidConfig, "norm cap must be positive");
  for (std::size_t c = 0; c < model.dense.rows(); ++c) {
    auto row = model.dense.row(c);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > cap) {
      const double factor = cap / norm;
      for (auto& v : row) v *= factor;
    }
  }
}

}  // namespace textshift
