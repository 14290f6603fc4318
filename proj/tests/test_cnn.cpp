#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "textshift/error.hpp"

using namespace testing;

namespace {

CnnModel small_model(std::size_t classes, std::uint64_t seed, double dropout = 0.5) {
  CnnConfig config;
  config.embed_dim = 4;
  config.filter_widths = {2, 3};
  config.filters_per_width = 3;
  config.dropout = dropout;
  const auto vocab = numbered_vocab(6);
  return CnnModel(numbered_labels(classes), vocab, config, init_embeddings(vocab, nullptr, 4, seed), seed);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("embed_sentence pads to the widest filter and looks rows up exactly") {
  const auto vocab = numbered_vocab(3);
  const auto E = init_embeddings(vocab, nullptr, 3, 2);
  const auto one = embed_sentence(std::vector<std::string>{"v1"}, vocab, E, 4);
  REQUIRE(one.rows.rows() == 4);
  for (std::size_t j = 0; j < 3; ++j) CHECK(one.rows(0, j) == E.values(vocab.index("v1"), j));
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(one.rows(r, j) == 0.0);
  }
  const auto unseen = embed_sentence(std::vector<std::string>{"x", "y", "z"}, vocab, E, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(unseen.rows(r, j) == E.values(kUnkIndex, j));
  }
  CHECK(code_of([&] { embed_sentence(std::vector<std::string>{}, vocab, E, 2); }) == ErrorCode::EmptySentence);
}

TEST_CASE("conv_feature_map slides a tanh window") {
  SentenceMatrix s;
  s.rows = Matrix(3, 1);
  s.rows(0, 0) = 1;
  s.rows(1, 0) = 2;
  s.rows(2, 0) = 3;
  s.indices = {2, 3, 4};
  const auto c = conv_feature_map(s, ConvFilter{2, {1.0, 1.0}, 0.0});
  REQUIRE(c.size() == 2);
  CHECK(c[0] == doctest::Approx(std::tanh(3.0)).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(std::tanh(5.0)).epsilon(1e-15));

  const auto zero = conv_feature_map(s, ConvFilter{2, {0.0, 0.0}, 0.0});
  CHECK(zero == std::vector<double>{0.0, 0.0});
  CHECK(code_of([&] { conv_feature_map(s, ConvFilter{4, std::vector<double>(4, 1.0), 0.0}); }) ==
        ErrorCode::WindowTooLarge);
}

TEST_CASE("feature map length is n - h + 1") {
  Rng rng(8);
  for (std::size_t n = 1; n <= 100; n += 3) {
    for (std::size_t h = 1; h <= std::min<std::size_t>(n, 5); ++h) {
      SentenceMatrix s;
      s.rows = Matrix(n, 2, 0.1);
      s.indices.assign(n, 2);
      CHECK(conv_feature_map(s, ConvFilter{h, std::vector<double>(2 * h, 0.3), 0.0}).size() == n - h + 1);
    }
  }
  SentenceMatrix s;
  s.rows = Matrix(100, 1, 0.5);
  s.indices.assign(100, 2);
  CHECK(conv_feature_map(s, ConvFilter{3, {1, 1, 1}, 0}).size() == 98);
}

TEST_CASE("max_pool picks the first maximum") {
  const auto r = max_pool(std::vector<double>{-1.0, 0.5, 0.2});
  CHECK(r.value == 0.5);
  CHECK(r.argmax == 1);
  const auto tie = max_pool(std::vector<double>(5, 0.25));
  CHECK(tie.value == 0.25);
  CHECK(tie.argmax == 0);
  CHECK(code_of([] { max_pool(std::vector<double>{}); }) == ErrorCode::EmptyFeatureMap);

  Rng rng(4);
  std::vector<double> values(1000);
  for (auto& v : values) v = std::round(rng.normal() * 4.0) / 4.0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  const auto pooled = max_pool(values);
  CHECK(pooled.argmax == best);
  CHECK(pooled.value == values[best]);
}

TEST_CASE("zero dense layer yields a uniform distribution") {
  CnnConfig config;
  config.embed_dim = 5;
  const auto vocab = numbered_vocab(3);
  CnnModel model(job_categories(), vocab, config, init_embeddings(vocab, nullptr, 5, 1), 1);
  for (auto& w : model.dense.values()) w = 0.0;
  const std::vector<std::size_t> idx{2, 3, 4};
  const auto probs = predict_proba(model, idx);
  REQUIRE(probs.size() == 27);
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 27.0).epsilon(1e-12));
  CHECK(cross_entropy_loss(probs, 3) == doctest::Approx(std::log(27.0)).epsilon(1e-12));
}

TEST_CASE("all-ones mask in train mode equals test mode when p = 0") {
  auto model = small_model(3, 5, 0.0);
  const std::vector<std::size_t> idx{2, 5, 3, 1};
  const std::vector<std::uint8_t> ones(model.num_features(), 1);
  CHECK(forward(model, idx, Mode::Train, ones).probabilities == forward(model, idx, Mode::Test).probabilities);
  CHECK(code_of([&] { forward(model, idx, Mode::Train); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { forward(model, idx, Mode::Test, ones); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("forward matches the direct-summation oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_tiny_cnn(rng);
    const auto test = forward(c.model, c.indices, Mode::Test);
    const auto train = forward(c.model, c.indices, Mode::Train, c.mask);
    const auto test_oracle = cnn_logits_oracle(c.model, c.indices, nullptr);
    const auto train_oracle = cnn_logits_oracle(c.model, c.indices, &c.mask);
    for (std::size_t j = 0; j < test_oracle.size(); ++j) {
      CHECK(std::abs(test.logits[j] - test_oracle[j]) <= 1e-10);
      CHECK(std::abs(train.logits[j] - train_oracle[j]) <= 1e-10);
    }
  }
}

TEST_CASE("softmax is positive, normalized and shift invariant") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(2 + rng.index(30));
    for (auto& l : logits) l = rng.normal() * 20.0;
    const auto p = softmax(logits);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    for (double v : p) CHECK(v > 0.0);
    auto shifted = logits;
    const double shift = rng.normal() * 50.0;
    for (auto& l : shifted) l += shift;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("cross-entropy edge values and logit gradient") {
  CHECK(cross_entropy_loss(std::vector<double>{0.0, 1.0}, 1) == 0.0);
  CHECK(cross_entropy_loss(std::vector<double>{0.0, 1.0}, 0) == doctest::Approx(-std::log(kProbabilityFloor)));

  Rng rng(6);
  std::vector<double> logits(5);
  for (auto& l : logits) l = rng.normal();
  const std::size_t label = 2;
  const auto p = softmax(logits);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    auto up = logits;
    auto down = logits;
    up[j] += kGradStep;
    down[j] -= kGradStep;
    const double numeric =
        (cross_entropy_loss(softmax(up), label) - cross_entropy_loss(softmax(down), label)) / (2 * kGradStep);
    const double analytic = p[j] - (j == label ? 1.0 : 0.0);
    CHECK(relative_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("backward matches central differences on random tiny models") {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto result = check_cnn_gradients(random_tiny_cnn(rng));
    CHECK(result.pad_row_zero);
    CHECK(result.checked > 0);
    worst = std::max(worst, result.max_rel_error);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward in test mode also matches central differences") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = random_tiny_cnn(rng);
    auto loss = [&] { return cross_entropy_loss(forward(c.model, c.indices, Mode::Test).probabilities, c.label); };
    const auto grads = backward(c.model, forward(c.model, c.indices, Mode::Test), c.label);
    auto params = c.model.parameter_blocks();
    const auto g = grads.blocks();
    const auto last = params.size() - 2;  // dense weights
    for (std::size_t i = 0; i < params[last].size(); ++i) {
      const double saved = params[last][i];
      params[last][i] = saved + kGradStep;
      const double up = loss();
      params[last][i] = saved - kGradStep;
      const double down = loss();
      params[last][i] = saved;
      CHECK(relative_error(g[last][i], (up - down) / (2 * kGradStep)) <= 1e-4);
    }
  }
}

TEST_CASE("dropped features pass no gradient to their filters") {
  auto model = small_model(3, 9);
  const std::vector<std::size_t> idx{2, 3, 4, 5, 6};
  std::vector<std::uint8_t> mask(model.num_features(), 1);
  mask[1] = 0;
  mask[4] = 0;
  const auto grads = backward(model, forward(model, idx, Mode::Train, mask), 1);
  for (std::size_t f : {1u, 4u}) {
    for (double v : grads.filter_weights[f]) CHECK(v == 0.0);
    CHECK(grads.filter_bias[f] == 0.0);
    for (std::size_t c = 0; c < model.num_classes(); ++c) CHECK(grads.dense(c, f) == 0.0);
  }
  bool any_nonzero = false;
  for (double v : grads.filter_weights[0]) any_nonzero = any_nonzero || v != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("PAD row receives no gradient even when padding is used") {
  auto model = small_model(2, 10);
  const std::vector<std::size_t> idx{3};
  std::vector<std::uint8_t> mask(model.num_features(), 1);
  const auto grads = backward(model, forward(model, idx, Mode::Train, mask), 0);
  for (double v : grads.embeddings.row(kPadIndex)) CHECK(v == 0.0);
}

TEST_CASE("backward rejects a cache from another model shape") {
  auto a = small_model(3, 1);
  auto b = small_model(2, 1);
  const std::vector<std::size_t> idx{2, 3, 4};
  const auto cache = forward(a, idx, Mode::Test);
  CHECK(code_of([&] { backward(b, cache, 0); }) == ErrorCode::StaleCache);
}

TEST_CASE("renorm_dense_rows caps norms and keeps directions") {
  auto model = small_model(3, 2);
  const std::size_t F = model.num_features();
  model.dense = Matrix(3, F, 0.0);
  model.dense(0, 0) = 12.0;
  model.dense(0, 1) = 16.0;  // norm 20
  model.dense(1, 0) = 3.0;
  model.dense(1, 1) = 4.0;  // norm 5
  const auto before = model.dense;
  renorm_dense_rows(model, 10.0);
  CHECK(model.dense(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(model.dense(0, 1) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(std::hypot(model.dense(0, 0), model.dense(0, 1)) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(model.dense(1, 0) == before(1, 0));
  CHECK(model.dense(1, 1) == before(1, 1));
  CHECK(model.dense(0, 0) / 10.0 == doctest::Approx(before(0, 0) / 20.0).epsilon(1e-15));
}

TEST_CASE("permuting filters with their dense columns leaves probabilities bit-identical") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto model = small_model(4, 100 + trial);
    for (auto& b : model.dense_bias) b = rng.normal();
    const std::size_t F = model.num_features();
    std::vector<std::size_t> perm(F);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    auto permuted = model;
    for (std::size_t j = 0; j < F; ++j) {
      permuted.filters[j] = model.filters[perm[j]];
      for (std::size_t c = 0; c < model.num_classes(); ++c) permuted.dense(c, j) = model.dense(c, perm[j]);
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 1 + rng.index(9); ++i) idx.push_back(1 + rng.index(7));
    CHECK(predict_proba(model, idx) == predict_proba(permuted, idx));
  }
}

TEST_CASE("dropout mask keeps features with probability 1 - p") {
  auto model = small_model(2, 3);
  Rng rng(17);
  std::size_t kept = 0;
  std::size_t total = 0;
  for (int i = 0; i < 4000; ++i) {
    for (auto m : sample_dropout_mask(model, rng)) {
      kept += m;
      ++total;
    }
  }
  const double rate = static_cast<double>(kept) / static_cast<double>(total);
  CHECK(std::abs(rate - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(total)));
}

TEST_CASE("pooled features ignore the mode flag and match the cache") {
  auto model = small_model(3, 4);
  const std::vector<std::size_t> idx{2, 3, 4, 2};
  const auto z = pooled_features(model, idx);
  CHECK(z == forward(model, idx, Mode::Test).pooled);
  model.mode = Mode::Train;
  CHECK(pooled_features(model, idx) == z);
}
