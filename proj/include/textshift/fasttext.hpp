#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textshift/corpus.hpp"
#include "textshift/embeddings.hpp"
#include "textshift/matrix.hpp"

namespace textshift {

struct FastTextConfig {
  std::size_t dim = 10;
  std::size_t max_ngram = 4;
  std::size_t buckets = std::size_t{1} << 21;

  void validate() const;

  friend bool operator==(const FastTextConfig&, const FastTextConfig&) = default;
};

/// Averaged word and hashed n-gram embeddings feeding a linear softmax layer.
class FastTextModel {
 public:
  FastTextModel() = default;
  /// Input tables uniform on [-1/d, 1/d]; output layer zero.
  FastTextModel(LabelSet labels, Vocabulary vocab, FastTextConfig config, std::uint64_t seed);

  LabelSet labels;
  Vocabulary vocab;
  FastTextConfig config;
  Matrix word_table;   // |V| x d
  Matrix ngram_table;  // B x d
  Matrix output;       // C x d
  std::vector<double> output_bias;

  std::size_t num_classes() const noexcept { return output.rows(); }

  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  friend bool operator==(const FastTextModel&, const FastTextModel&) = default;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Bucket ids of every contiguous n-gram with 2 <= n <= max_ngram; the hash
/// input is the n tokens joined with 0x1F.
std::vector<std::size_t> extract_ngrams(const std::vector<std::string>& tokens,
                                        std::size_t max_ngram, std::size_t buckets);

/// Row ids a document contributes to the average.
struct FtInput {
  std::vector<std::size_t> words;
  std::vector<std::size_t> ngrams;

  std::size_t count() const noexcept { return words.size() + ngrams.size(); }
};

FtInput ft_encode(const FastTextModel& model, const std::vector<std::string>& tokens);

/// Mean of the document's word and n-gram rows, with multiplicity.
std::vector<double> ft_hidden(const FastTextModel& model, const FtInput& input);
std::vector<double> ft_logits(const FastTextModel& model, const FtInput& input);
std::vector<double> ft_forward(const FastTextModel& model, const FtInput& input);
std::vector<double> ft_forward(const FastTextModel& model, const std::vector<std::string>& tokens);

/// Cross-entropy gradients for one document.
struct FtGradients {
  Matrix output;
  std::vector<double> output_bias;
  std::vector<double> hidden;  // d loss / d hidden; each input row gets hidden / count
  double loss = 0.0;
};

FtGradients ft_gradients(const FastTextModel& model, const FtInput& input, std::size_t label);

struct FtTrainOptions {
  std::size_t epochs = 5;
  double lr0 = 0.25;
  std::uint64_t seed = 1;
};

struct FtEpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

/// Per-document gradient descent; the step size decays linearly from lr0 to
/// zero over epochs * |corpus| updates. Documents are visited in a seeded
/// shuffled order fixed for the run.
void ft_train(FastTextModel& model, const Corpus& corpus, const FtTrainOptions& options,
              const std::function<void(const FtEpochStats&)>& on_epoch = {});

}  // namespace textshift
