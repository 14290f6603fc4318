#include "textshift/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <type_traits>

#include <boost/crc.hpp>

#include "textshift/error.hpp"
#include "textshift/io.hpp"

namespace textshift {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::Cnn ? "cnn" : "fasttext";
}

std::uint32_t crc32c(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace {

constexpr char kMagic[4] = {'S', 'N', 'A', 'P'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void uint(std::uint64_t value, int width) {
    for (int i = 0; i < width; ++i) buffer_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value), 8); }
  std::vector<std::uint8_t>& buffer() { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string_view text(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, "checkpoint ends early");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

json optimizer_to_json(const OptimizerState& state) {
  json blocks = json::array();
  for (const auto& b : state.acc_grad) blocks.push_back(b.size());
  return {{"kind", std::string(to_string(state.config.kind))},
          {"rho", state.config.rho},
          {"epsilon", state.config.epsilon},
          {"learning_rate", state.config.learning_rate},
          {"blocks", blocks}};
}

std::vector<std::string> user_tokens(const Vocabulary& vocab) {
  return {vocab.tokens().begin() + 2, vocab.tokens().end()};
}

void write_container(ModelKind kind, json meta, const std::vector<std::span<const double>>& blocks,
                     const CheckpointExtras& extras, const std::filesystem::path& path) {
  json sizes = json::array();
  for (const auto& b : blocks) sizes.push_back(b.size());
  meta["blocks"] = sizes;
  meta["optimizer"] = extras.optimizer ? optimizer_to_json(*extras.optimizer) : json(nullptr);
  meta["info"] = extras.info;

  Writer w;
  w.bytes(kMagic, 4);
  w.uint(kCheckpointVersion, 2);
  w.uint(static_cast<std::uint8_t>(kind), 1);
  const std::string text = meta.dump();
  w.uint(text.size(), 8);
  w.bytes(text.data(), text.size());

  std::size_t count = 0;
  for (const auto& b : blocks) count += b.size();
  if (extras.optimizer) {
    for (const auto& b : extras.optimizer->acc_grad) count += b.size();
    for (const auto& b : extras.optimizer->acc_update) count += b.size();
  }
  w.uint(count, 8);
  for (const auto& b : blocks) {
    for (double v : b) w.f64(v);
  }
  if (extras.optimizer) {
    for (const auto& b : extras.optimizer->acc_grad) {
      for (double v : b) w.f64(v);
    }
    for (const auto& b : extras.optimizer->acc_update) {
      for (double v : b) w.f64(v);
    }
  }
  const std::uint32_t crc = crc32c(w.buffer());
  w.uint(crc, 4);

  const auto& buffer = w.buffer();
  write_file_atomic(
      path,
      [&](std::ostream& out) {
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size()));
      },
      /*binary=*/true);
}

struct Container {
  ModelKind kind;
  json meta;
  std::vector<double> payload;
  std::size_t cursor = 0;

  void take(std::span<double> dst) {
    if (payload.size() - cursor < dst.size()) {
      throw Error(ErrorCode::TruncatedFile, "checkpoint payload shorter than declared blocks");
    }
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(cursor), dst.size(), dst.begin());
    cursor += dst.size();
  }
};

Container read_container(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not a checkpoint");
  }
  if (bytes.size() < 4 + 2 + 1 + 8 + 8 + 4) {
    throw Error(ErrorCode::TruncatedFile, path.string() + " is too short");
  }
  Reader header(bytes.subspan(4));
  const auto version = static_cast<std::uint16_t>(header.uint(2));
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version));
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  const auto stored = static_cast<std::uint32_t>(tail.uint(4));
  if (crc32c(body) != stored) {
    throw Error(ErrorCode::ChecksumMismatch, path.string() + " failed its integrity check");
  }

  Reader r(body.subspan(6));
  Container c;
  const auto kind = r.uint(1);
  if (kind != static_cast<std::uint8_t>(ModelKind::Cnn) &&
      kind != static_cast<std::uint8_t>(ModelKind::FastText)) {
    throw Error(ErrorCode::BadModelKind, "unknown model kind tag " + std::to_string(kind));
  }
  c.kind = static_cast<ModelKind>(kind);
  const auto meta_len = r.uint(8);
  try {
    c.meta = json::parse(r.text(meta_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("checkpoint metadata: ") + e.what());
  }
  const auto count = r.uint(8);
  if (r.remaining() != count * 8) {
    throw Error(ErrorCode::TruncatedFile, "checkpoint payload length mismatch");
  }
  c.payload.resize(count);
  for (auto& v : c.payload) v = r.f64();
  return c;
}

void check_blocks(const Container& c, const std::vector<std::span<double>>& blocks) {
  const auto& sizes = c.meta.at("blocks");
  if (sizes.size() != blocks.size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint block count does not match model layout");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (sizes[i].get<std::size_t>() != blocks[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint block size does not match model layout");
    }
  }
}

void read_extras(Container& c, CheckpointExtras* extras) {
  std::optional<OptimizerState> optimizer;
  const auto& meta = c.meta.at("optimizer");
  if (!meta.is_null()) {
    OptimizerState state;
    state.config.kind = parse_optimizer(meta.at("kind").get<std::string>());
    state.config.rho = meta.at("rho").get<double>();
    state.config.epsilon = meta.at("epsilon").get<double>();
    state.config.learning_rate = meta.at("learning_rate").get<double>();
    for (const auto& size : meta.at("blocks")) state.acc_grad.emplace_back(size.get<std::size_t>());
    state.acc_update = state.acc_grad;
    for (auto& b : state.acc_grad) c.take(b);
    for (auto& b : state.acc_update) c.take(b);
    optimizer = std::move(state);
  }
  if (c.cursor != c.payload.size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint payload has trailing values");
  }
  if (extras) {
    extras->optimizer = std::move(optimizer);
    extras->info = c.meta.value("info", json::object());
  }
}

// Full parameter listing for persistence, independent of trainability.
template <class Model>
auto cnn_storage(Model& m) {
  using Value = std::conditional_t<std::is_const_v<Model>, const double, double>;
  std::vector<std::span<Value>> blocks{m.embeddings.values.values()};
  for (auto& f : m.filters) {
    blocks.emplace_back(f.weights);
    blocks.emplace_back(&f.bias, 1);
  }
  blocks.push_back(m.dense.values());
  blocks.emplace_back(m.dense_bias);
  return blocks;
}

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras) {
  json widths = json::array();
  for (const auto& f : model.filters) widths.push_back(f.width);
  json meta = {
      {"labels", model.labels.names()},
      {"vocab", user_tokens(model.vocab)},
      {"model",
       {{"embed_dim", model.config.embed_dim},
        {"filter_widths", model.config.filter_widths},
        {"filters_per_width", model.config.filters_per_width},
        {"dropout", model.config.dropout},
        {"norm_cap", model.config.norm_cap},
        {"init_range", model.config.init_range},
        {"trainable_embeddings", model.embeddings.trainable},
        {"filter_layout", widths}}},
  };
  write_container(ModelKind::Cnn, std::move(meta), cnn_storage(model), extras, path);
}

void save_model(const FastTextModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras) {
  json meta = {
      {"labels", model.labels.names()},
      {"vocab", user_tokens(model.vocab)},
      {"model",
       {{"dim", model.config.dim},
        {"max_ngram", model.config.max_ngram},
        {"buckets", model.config.buckets}}},
  };
  write_container(ModelKind::FastText, std::move(meta), model.parameter_blocks(), extras, path);
}

void save_model(const AnyModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras) {
  std::visit([&](const auto& m) { save_model(m, path, extras); }, model);
}

ModelKind peek_model_kind(const std::filesystem::path& path) {
  return read_container(path).kind;
}

namespace {

CnnModel cnn_from(Container& c, CheckpointExtras* extras) {
  const auto& meta = c.meta;
  const auto& m = meta.at("model");
  CnnModel model;
  model.labels = LabelSet(meta.at("labels").get<std::vector<std::string>>());
  model.vocab = Vocabulary(meta.at("vocab").get<std::vector<std::string>>());
  model.config.embed_dim = m.at("embed_dim").get<std::size_t>();
  model.config.filter_widths = m.at("filter_widths").get<std::vector<std::size_t>>();
  model.config.filters_per_width = m.at("filters_per_width").get<std::size_t>();
  model.config.dropout = m.at("dropout").get<double>();
  model.config.norm_cap = m.at("norm_cap").get<double>();
  model.config.init_range = m.at("init_range").get<double>();
  model.embeddings.trainable = m.at("trainable_embeddings").get<bool>();
  model.embeddings.values = Matrix(model.vocab.size(), model.config.embed_dim);
  const std::size_t k = model.config.embed_dim;
  for (const auto& width : m.at("filter_layout")) {
    const auto h = width.get<std::size_t>();
    model.filters.push_back(ConvFilter{h, std::vector<double>(h * k), 0.0});
  }
  model.dense = Matrix(model.labels.size(), model.filters.size());
  model.dense_bias.assign(model.labels.size(), 0.0);
  auto blocks = cnn_storage(model);
  check_blocks(c, blocks);
  for (auto& b : blocks) c.take(b);
  read_extras(c, extras);
  return model;
}

FastTextModel fasttext_from(Container& c, CheckpointExtras* extras) {
  const auto& meta = c.meta;
  const auto& m = meta.at("model");
  FastTextModel model;
  model.labels = LabelSet(meta.at("labels").get<std::vector<std::string>>());
  model.vocab = Vocabulary(meta.at("vocab").get<std::vector<std::string>>());
  model.config.dim = m.at("dim").get<std::size_t>();
  model.config.max_ngram = m.at("max_ngram").get<std::size_t>();
  model.config.buckets = m.at("buckets").get<std::size_t>();
  const std::size_t d = model.config.dim;
  model.word_table = Matrix(model.vocab.size(), d);
  model.ngram_table = Matrix(model.config.max_ngram >= 2 ? model.config.buckets : 0, d);
  model.output = Matrix(model.labels.size(), d);
  model.output_bias.assign(model.labels.size(), 0.0);
  auto blocks = model.parameter_blocks();
  check_blocks(c, blocks);
  for (auto& b : blocks) c.take(b);
  read_extras(c, extras);
  return model;
}

template <class Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("checkpoint metadata: ") + e.what());
  }
}

}  // namespace

CnnModel load_cnn(const std::filesystem::path& path, CheckpointExtras* extras) {
  auto c = read_container(path);
  if (c.kind != ModelKind::Cnn) {
    throw Error(ErrorCode::BadModelKind, path.string() + " holds a " +
                                             std::string(to_string(c.kind)) + " model, not cnn");
  }
  return guarded([&] { return cnn_from(c, extras); });
}

FastTextModel load_fasttext(const std::filesystem::path& path, CheckpointExtras* extras) {
  auto c = read_container(path);
  if (c.kind != ModelKind::FastText) {
    throw Error(ErrorCode::BadModelKind, path.string() + " holds a " +
                                             std::string(to_string(c.kind)) +
                                             " model, not fasttext");
  }
  return guarded([&] { return fasttext_from(c, extras); });
}

AnyModel load_model(const std::filesystem::path& path, CheckpointExtras* extras) {
  auto c = read_container(path);
  return guarded([&]() -> AnyModel {
    if (c.kind == ModelKind::Cnn) return cnn_from(c, extras);
    return fasttext_from(c, extras);
  });
}

}  // namespace textshift
