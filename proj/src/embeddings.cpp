#include "textshift/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "textshift/error.hpp"
#include "textshift/io.hpp"
#include "textshift/rng.hpp"

namespace textshift {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_.reserve(tokens.size() + 2);
  tokens_.emplace_back(kPadToken);
  tokens_.emplace_back(kUnkToken);
  index_.emplace(std::string(kPadToken), kPadIndex);
  index_.emplace(std::string(kUnkToken), kUnkIndex);
  for (const auto& token : tokens) {
    if (!index_.emplace(token, tokens_.size()).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate vocabulary entry '" + token + "'");
    }
    tokens_.push_back(token);
  }
}

std::size_t Vocabulary::index(std::string_view token) const {
  return find(token).value_or(kUnkIndex);
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (min_count == 0) throw Error(ErrorCode::InvalidConfig, "min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& token : doc.tokens) ++counts[token];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  // std::map iteration is already lexicographic; a stable sort keeps that
  // order among equal counts.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& entry : kept) tokens.push_back(std::move(entry.first));
  return Vocabulary(tokens);
}

namespace {

std::uint32_t swap_bytes(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) | ((v & 0x00FF0000u) >> 8) |
         ((v & 0xFF000000u) >> 24);
}

float float_from_le(const char* bytes) {
  std::uint32_t bits;
  std::memcpy(&bits, bytes, 4);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return std::bit_cast<float>(bits);
}

void float_to_le(float value, char* bytes) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  std::memcpy(bytes, &bits, 4);
}

bool parse_size(std::string_view text, std::size_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

WordVectors read_word2vec_binary(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw Error(ErrorCode::BadHeader, "no header line");
  const std::string_view header(bytes.data(), newline);
  const auto space = header.find(' ');
  std::size_t count = 0;
  std::size_t dim = 0;
  if (space == std::string_view::npos || !parse_size(header.substr(0, space), count) ||
      !parse_size(header.substr(space + 1), dim)) {
    throw Error(ErrorCode::BadHeader, "expected '<vocab_size> <dim>', got '" +
                                          std::string(header) + "'");
  }
  if (dim == 0 && count > 0) throw Error(ErrorCode::BadHeader, "dimension is zero");

  WordVectors out;
  out.dim = dim;
  out.words.reserve(count);
  out.values.resize(count * dim);
  std::size_t pos = newline + 1;
  auto truncated = [&](std::size_t got) {
    return Error(ErrorCode::TruncatedFile, "expected " + std::to_string(count) +
                                               " entries, got " + std::to_string(got));
  };
  for (std::size_t i = 0; i < count; ++i) {
    const auto word_end = bytes.find(' ', pos);
    if (word_end == std::string::npos) throw truncated(i);
    std::string word = bytes.substr(pos, word_end - pos);
    if (word.empty() || word.find('\n') != std::string::npos) {
      throw Error(ErrorCode::InvalidWord, "bad word at entry " + std::to_string(i));
    }
    pos = word_end + 1;
    if (bytes.size() - pos < dim * 4) throw truncated(i);
    for (std::size_t j = 0; j < dim; ++j) {
      const float v = float_from_le(bytes.data() + pos + 4 * j);
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, word);
      out.values[i * dim + j] = v;
    }
    pos += dim * 4;
    if (pos < bytes.size() && bytes[pos] == '\n') {
      ++pos;
    } else if (pos < bytes.size() || i + 1 < count) {
      // Only the final entry may omit its terminator.
      if (pos >= bytes.size()) throw truncated(i + 1);
      throw Error(ErrorCode::BadHeader, "missing newline after entry " + std::to_string(i));
    }
    out.words.push_back(std::move(word));
  }
  return out;
}

void write_word2vec_binary(const WordVectors& vectors, const std::filesystem::path& path) {
  if (vectors.values.size() != vectors.words.size() * vectors.dim) {
    throw Error(ErrorCode::DimensionMismatch, "matrix size does not match word count x dim");
  }
  for (const auto& word : vectors.words) {
    if (word.empty() || word.find_first_of(" \n") != std::string::npos) {
      throw Error(ErrorCode::InvalidWord, "'" + word + "' cannot be encoded");
    }
  }
  write_file_atomic(
      path,
      [&](std::ostream& out) {
        out << vectors.words.size() << ' ' << vectors.dim << '\n';
        std::vector<char> buffer(vectors.dim * 4);
        for (std::size_t i = 0; i < vectors.words.size(); ++i) {
          out << vectors.words[i] << ' ';
          for (std::size_t j = 0; j < vectors.dim; ++j) {
            float_to_le(vectors.values[i * vectors.dim + j], buffer.data() + 4 * j);
          }
          out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
          out << '\n';
        }
      },
      /*binary=*/true);
}

EmbeddingMatrix init_embeddings(const Vocabulary& vocab, const WordVectors* pretrained,
                                std::size_t dim, std::uint64_t seed, double init_range) {
  if (pretrained && pretrained->dim != dim) {
    throw Error(ErrorCode::DimensionMismatch, "pretrained dim " + std::to_string(pretrained->dim) +
                                                  " != " + std::to_string(dim));
  }
  std::unordered_map<std::string_view, std::size_t> lookup;
  if (pretrained) {
    for (std::size_t i = 0; i < pretrained->words.size(); ++i) {
      lookup.emplace(pretrained->words[i], i);  // first occurrence wins
    }
  }
  EmbeddingMatrix embeddings{Matrix(vocab.size(), dim), true};
  Rng rng(seed);
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    auto row = embeddings.values.row(r);
    // Draw for every row so random rows do not depend on pretrained coverage.
    for (auto& v : row) v = rng.uniform(-init_range, init_range);
    if (r == kPadIndex) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    if (r == kUnkIndex) continue;
    auto it = lookup.find(vocab.token(r));
    if (it != lookup.end()) {
      auto src = pretrained->row(it->second);
      std::copy(src.begin(), src.end(), row.begin());
    }
  }
  return embeddings;
}

}  // namespace textshift
