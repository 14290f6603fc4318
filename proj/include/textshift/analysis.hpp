#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "textshift/cnn_model.hpp"
#include "textshift/corpus.hpp"
#include "textshift/matrix.hpp"

namespace textshift {

struct FrequencyProfile {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, double> frequency;  // count / total_tokens
  std::size_t total_tokens = 0;
};

FrequencyProfile frequency_profile(const Corpus& corpus);

struct TokenComparison {
  std::string token;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  double f_a = 0.0;
  double f_b = 0.0;
  double ratio_ab = 0.0;  // f_a / f_b
};

struct RatioRow {
  std::size_t rank = 0;  // 1-based
  std::string token;
  double f_a = 0.0;
  double f_b = 0.0;
  double ratio = 0.0;
};

struct DomainComparison {
  std::vector<TokenComparison> shared;  // lexicographic by token
  double rho = 0.0;
  std::vector<RatioRow> a_over_b;  // ratio f_a / f_b, descending
  std::vector<RatioRow> b_over_a;  // ratio f_b / f_a, descending
};

/// Tokens with raw count >= min_count in both corpora, their normalized
/// frequencies and ratios, the top_k rows of each ratio direction, and the
/// Pearson correlation of the frequency pairs.
DomainComparison compare_domains(const Corpus& a, const Corpus& b, std::size_t min_count = 5,
                                 std::size_t top_k = 15);

/// Product-moment correlation. DegenerateInput for mismatched or short
/// inputs and for a constant series.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Three CSV blocks separated by blank lines: the A/B table, the B/A table
/// (columns rank,word,f_a,f_b,ratio) and a summary (rho,shared_tokens).
void write_comparison_report(const DomainComparison& comparison, const std::filesystem::path& path);
void write_comparison_report(const DomainComparison& comparison, std::ostream& out);

/// Concatenated max-pooled convolution outputs; ignores the model's mode.
std::vector<double> extract_features(const CnnModel& model, const std::vector<std::string>& tokens);

/// One feature row per document, computed in document order.
Matrix extract_feature_matrix(const CnnModel& model, const Corpus& corpus, std::size_t threads = 1);

struct ProjectionRow {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::string label;
  std::string domain;
};

/// CSV with header id,x,y,label_name,domain_tag; coordinates printed with 12
/// significant digits.
void export_projection(const Matrix& coords, const Corpus& corpus, const std::filesystem::path& path);
std::vector<ProjectionRow> read_projection(const std::filesystem::path& path);

}  // namespace textshift
