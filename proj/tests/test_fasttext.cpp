#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "textshift/error.hpp"
#include "textshift/training.hpp"

using namespace testing;

namespace {

Corpus separable_corpus(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Corpus corpus{numbered_labels(2), {}};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t label = i % 2;
    Document d{label, {}, Domain::Source, std::to_string(i)};
    const auto n = 3 + rng.index(6);
    for (std::size_t j = 0; j < n; ++j) {
      d.tokens.push_back(rng.bernoulli(0.5) ? (label == 0 ? "alpha" : "omega") + std::to_string(rng.index(3))
                                            : "shared" + std::to_string(rng.index(10)));
    }
    d.tokens.push_back(label == 0 ? "alpha0" : "omega0");
    corpus.documents.push_back(d);
  }
  return corpus;
}

}  // namespace

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("extract_ngrams counts contiguous n-grams") {
  const std::vector<std::string> abc{"a", "b", "c"};
  CHECK(extract_ngrams(abc, 2, 1000).size() == 2);
  CHECK(extract_ngrams(abc, 4, 1000).size() == 3);
  CHECK(extract_ngrams({"a"}, 4, 1000).empty());
  const auto ids = extract_ngrams(abc, 3, 1u << 21);
  CHECK(ids[0] == fnv1a64_oracle("a\x1f" "b") % (1u << 21));
  CHECK(ids[1] == fnv1a64_oracle("b\x1f" "c") % (1u << 21));
  CHECK(ids[2] == fnv1a64_oracle("a\x1f" "b\x1f" "c") % (1u << 21));
}

TEST_CASE("zero tables give a uniform distribution") {
  FastTextConfig config;
  config.buckets = 64;
  FastTextModel model(job_categories(), numbered_vocab(3), config, 1);
  for (auto& v : model.word_table.values()) v = 0.0;
  for (auto& v : model.ngram_table.values()) v = 0.0;
  const auto p = ft_forward(model, std::vector<std::string>{"v0", "v1", "v2"});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("duplicating the whole bag leaves probabilities unchanged") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> doc;
    auto model = random_tiny_fasttext(rng, doc);
    const auto input = ft_encode(model, doc);
    FtInput doubled = input;
    doubled.words.insert(doubled.words.end(), input.words.begin(), input.words.end());
    doubled.ngrams.insert(doubled.ngrams.end(), input.ngrams.begin(), input.ngrams.end());
    const auto a = ft_forward(model, input);
    const auto b = ft_forward(model, doubled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("fastText logits match the direct-summation oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> doc;
    const auto model = random_tiny_fasttext(rng, doc);
    const auto logits = ft_logits(model, ft_encode(model, doc));
    const auto oracle = ft_logits_oracle(model, doc);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(logits[i] - oracle[i]) <= 1e-10);
    const auto p = ft_forward(model, doc);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("empty documents are rejected") {
  FastTextConfig config;
  config.buckets = 8;
  FastTextModel model(numbered_labels(2), numbered_vocab(2), config, 1);
  CHECK_THROWS_AS(ft_forward(model, std::vector<std::string>{}), Error);
}

TEST_CASE("fastText gradients match central differences") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> doc;
    auto model = random_tiny_fasttext(rng, doc);
    const std::size_t label = rng.index(model.num_classes());
    const auto input = ft_encode(model, doc);
    const auto g = ft_gradients(model, input, label);
    auto loss = [&] { return cross_entropy_loss(ft_forward(model, input), label); };
    auto numeric = [&](double& param) {
      const double saved = param;
      param = saved + kGradStep;
      const double up = loss();
      param = saved - kGradStep;
      const double down = loss();
      param = saved;
      return (up - down) / (2 * kGradStep);
    };
    CHECK(g.loss == doctest::Approx(loss()).epsilon(1e-12));
    for (std::size_t i = 0; i < model.output.size(); ++i) {
      CHECK(relative_error(g.output.values()[i], numeric(model.output.values()[i])) <= 1e-4);
    }
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
      CHECK(relative_error(g.output_bias[c], numeric(model.output_bias[c])) <= 1e-4);
    }
    // An input row's gradient is hidden / count times its multiplicity.
    const std::size_t row = input.words.front();
    const double multiplicity =
        static_cast<double>(std::count(input.words.begin(), input.words.end(), row));
    for (std::size_t j = 0; j < model.config.dim; ++j) {
      const double analytic = g.hidden[j] * multiplicity / static_cast<double>(input.count());
      CHECK(relative_error(analytic, numeric(model.word_table(row, j))) <= 1e-4);
    }
  }
}

TEST_CASE("ft_train with lr0 = 0 changes nothing") {
  const auto corpus = separable_corpus(20, 1);
  FastTextConfig config;
  config.buckets = 512;
  FastTextModel model(corpus.label_set, build_vocab(corpus), config, 2);
  const auto before = model;
  ft_train(model, corpus, FtTrainOptions{3, 0.0, 4});
  CHECK(model == before);
}

TEST_CASE("ft_train is deterministic and fits a separable corpus") {
  const auto corpus = separable_corpus(100, 2);
  FastTextConfig config;
  config.buckets = 4096;
  const FastTextModel initial(corpus.label_set, build_vocab(corpus), config, 3);
  auto a = initial;
  auto b = initial;
  std::vector<double> losses;
  ft_train(a, corpus, FtTrainOptions{5, 0.25, 9}, [&](const FtEpochStats& s) { losses.push_back(s.mean_loss); });
  ft_train(b, corpus, FtTrainOptions{5, 0.25, 9});
  CHECK(a == b);
  CHECK(losses.size() == 5);
  CHECK(losses.back() < losses.front());
  CHECK(evaluate(a, corpus).accuracy >= 0.99);
}
