#include <doctest.h>

#include "support.hpp"
#include "textshift/checkpoint.hpp"
#include "textshift/error.hpp"
#include "textshift/training.hpp"

using namespace testing;

namespace {

ErrorCode load_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

CnnModel demo_cnn(std::uint64_t seed) {
  CnnConfig config;
  config.embed_dim = 6;
  config.filter_widths = {2, 4};
  config.filters_per_width = 3;
  const Vocabulary vocab({"alpha", "beta", "gamma", "delta"});
  return CnnModel(numbered_labels(3), vocab, config, init_embeddings(vocab, nullptr, 6, seed), seed);
}

std::vector<std::vector<std::string>> random_docs(Rng& rng, std::size_t count) {
  const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "unseen"};
  std::vector<std::vector<std::string>> docs(count);
  for (auto& d : docs) {
    const auto n = 1 + rng.index(9);
    for (std::size_t i = 0; i < n; ++i) d.push_back(words[rng.index(words.size())]);
  }
  return docs;
}

void flip_byte(const std::filesystem::path& path, std::size_t offset) {
  auto bytes = slurp(path);
  bytes[offset] = static_cast<char>(bytes[offset] ^ 0x5A);
  write_text(path, bytes);
}

}  // namespace

TEST_CASE("crc32c matches the standard check value") {
  const std::string s = "123456789";
  CHECK(crc32c({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xE3069283u);
}

TEST_CASE("cnn checkpoint round-trip is bit-exact") {
  TempDir dir;
  const auto model = demo_cnn(4);
  save_model(model, dir / "m.ckpt");
  CHECK(peek_model_kind(dir / "m.ckpt") == ModelKind::Cnn);
  const auto back = load_cnn(dir / "m.ckpt");
  CHECK(back == model);
  Rng rng(1);
  for (const auto& doc : random_docs(rng, 10)) {
    CHECK(predict_proba(back, encode_tokens(back.vocab, doc)) ==
          predict_proba(model, encode_tokens(model.vocab, doc)));
  }
}

TEST_CASE("frozen embeddings survive a round trip") {
  TempDir dir;
  auto model = demo_cnn(2);
  model.embeddings.trainable = false;
  save_model(model, dir / "m.ckpt");
  const auto back = load_cnn(dir / "m.ckpt");
  CHECK(back == model);
  CHECK(back.parameter_blocks().size() == model.parameter_blocks().size());
}

TEST_CASE("fastText checkpoint round-trip is bit-exact") {
  TempDir dir;
  FastTextConfig config;
  config.buckets = 128;
  config.max_ngram = 3;
  FastTextModel model(job_categories(), Vocabulary({"alpha", "beta"}), config, 7);
  Rng rng(2);
  for (auto& v : model.output.values()) v = rng.normal();
  save_model(model, dir / "f.ckpt");
  const auto back = load_fasttext(dir / "f.ckpt");
  CHECK(back == model);
  for (const auto& doc : random_docs(rng, 10)) CHECK(ft_forward(back, doc) == ft_forward(model, doc));
}

TEST_CASE("corrupted, truncated and mismatched checkpoints are rejected") {
  TempDir dir;
  const auto model = demo_cnn(5);
  save_model(model, dir / "m.ckpt");
  const auto size = std::filesystem::file_size(dir / "m.ckpt");

  std::filesystem::copy_file(dir / "m.ckpt", dir / "payload.ckpt");
  flip_byte(dir / "payload.ckpt", size - 40);
  CHECK(load_error([&] { load_cnn(dir / "payload.ckpt"); }) == ErrorCode::ChecksumMismatch);

  std::filesystem::copy_file(dir / "m.ckpt", dir / "meta.ckpt");
  flip_byte(dir / "meta.ckpt", 20);
  CHECK(load_error([&] { load_cnn(dir / "meta.ckpt"); }) == ErrorCode::ChecksumMismatch);

  std::filesystem::copy_file(dir / "m.ckpt", dir / "magic.ckpt");
  flip_byte(dir / "magic.ckpt", 0);
  CHECK(load_error([&] { load_cnn(dir / "magic.ckpt"); }) == ErrorCode::BadMagic);

  std::filesystem::copy_file(dir / "m.ckpt", dir / "version.ckpt");
  flip_byte(dir / "version.ckpt", 4);
  CHECK(load_error([&] { load_cnn(dir / "version.ckpt"); }) == ErrorCode::VersionUnsupported);

  auto bytes = slurp(dir / "m.ckpt");
  write_text(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  const auto short_code = load_error([&] { load_cnn(dir / "short.ckpt"); });
  CHECK((short_code == ErrorCode::ChecksumMismatch || short_code == ErrorCode::TruncatedFile));

  CHECK(load_error([&] { load_fasttext(dir / "m.ckpt"); }) == ErrorCode::BadModelKind);
  CHECK(std::holds_alternative<CnnModel>(load_model(dir / "m.ckpt")));
}

TEST_CASE("optimizer state round-trip continues training bit-identically") {
  TempDir dir;
  SynthConfig sc;
  sc.num_classes = 3;
  sc.docs_per_class_source = 10;
  const auto corpus = synth_generate(sc).source;
  CnnConfig config;
  config.embed_dim = 5;
  config.filter_widths = {2};
  config.filters_per_width = 4;
  const auto vocab = build_vocab(corpus);
  CnnModel model(corpus.label_set, vocab, config, init_embeddings(vocab, nullptr, 5, 1), 1);
  auto state = OptimizerState::for_blocks(OptimizerConfig{}, model.parameter_blocks());

  Rng rng(3);
  auto step = [&](CnnModel& m, OptimizerState& s, Rng& r) {
    auto grads = CnnGradients::zeros_like(m);
    for (int i = 0; i < 5; ++i) {
      const auto& doc = corpus.documents[r.index(corpus.size())];
      const auto mask = sample_dropout_mask(m, r);
      backward(m, forward(m, encode_tokens(m.vocab, doc.tokens), Mode::Train, mask), doc.label, grads);
    }
    grads.scale(0.2);
    s.step(m.parameter_blocks(), grads.blocks());
    renorm_dense_rows(m, m.config.norm_cap);
  };
  for (int i = 0; i < 4; ++i) step(model, state, rng);

  CheckpointExtras extras;
  extras.optimizer = state;
  extras.info = {{"note", "mid-run"}};
  save_model(model, dir / "mid.ckpt", extras);
  CheckpointExtras loaded_extras;
  auto resumed = load_cnn(dir / "mid.ckpt", &loaded_extras);
  REQUIRE(loaded_extras.optimizer.has_value());
  CHECK(*loaded_extras.optimizer == state);
  CHECK(loaded_extras.info == extras.info);

  Rng rng_a = rng;
  Rng rng_b = rng;
  auto state_b = *loaded_extras.optimizer;
  for (int i = 0; i < 4; ++i) {
    step(model, state, rng_a);
    step(resumed, state_b, rng_b);
  }
  CHECK(resumed == model);
  CHECK(state_b == state);
}

TEST_CASE("failed saves leave no file behind") {
  TempDir dir;
  const auto model = demo_cnn(1);
  CHECK_THROWS(save_model(model, dir / "missing-dir" / "m.ckpt"));
  CHECK_FALSE(std::filesystem::exists(dir / "missing-dir"));
}
