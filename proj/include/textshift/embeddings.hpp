#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "textshift/corpus.hpp"
#include "textshift/matrix.hpp"

namespace textshift {

inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnkIndex = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

/// Token to row index. Index 0 is PAD and index 1 is UNK.
class Vocabulary {
 public:
  Vocabulary();
  /// `tokens` excludes PAD and UNK; they take indices 2, 3, ...
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  /// UNK index for unseen tokens.
  std::size_t index(std::string_view token) const;
  std::optional<std::size_t> find(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  /// All entries including the reserved ones, by index.
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Tokens seen at least `min_count` times, ordered by descending count with
/// lexicographic tie-breaks.
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 1);

/// Vectors as stored in the word2vec binary format (float32).
struct WordVectors {
  std::vector<std::string> words;
  std::size_t dim = 0;
  std::vector<float> values;  // words.size() x dim, row-major

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  friend bool operator==(const WordVectors&, const WordVectors&) = default;
};

WordVectors read_word2vec_binary(const std::filesystem::path& path);
void write_word2vec_binary(const WordVectors& vectors, const std::filesystem::path& path);

struct EmbeddingMatrix {
  Matrix values;  // |V| x k
  bool trainable = true;

  std::size_t dim() const noexcept { return values.cols(); }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

inline constexpr double kEmbeddingInitRange = 0.25;

/// Pretrained rows are copied for tokens the vocabulary shares with
/// `pretrained`; every other row, UNK included, is uniform on
/// [-init_range, init_range]. The PAD row is zero.
EmbeddingMatrix init_embeddings(const Vocabulary& vocab, const WordVectors* pretrained,
                                std::size_t dim, std::uint64_t seed,
                                double init_range = kEmbeddingInitRange);

}  // namespace textshift
