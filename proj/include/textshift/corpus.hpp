#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace textshift {

inline constexpr std::size_t kDefaultMaxLen = 100;

/// Ordered category names; a name's position is its class index.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// The 27 industrial job categories used as the default taxonomy.
LabelSet job_categories();

/// One category name per line; blank lines are ignored.
LabelSet load_label_set(const std::filesystem::path& path);
void write_label_set(const LabelSet& labels, const std::filesystem::path& path);

enum class Domain { Source, Target, Other };

std::string_view to_string(Domain domain);
std::optional<Domain> parse_domain(std::string_view text);

struct Document {
  std::size_t label = 0;
  std::vector<std::string> tokens;
  Domain domain = Domain::Source;
  std::string id;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  LabelSet label_set;
  std::vector<Document> documents;

  std::size_t size() const noexcept { return documents.size(); }
  bool empty() const noexcept { return documents.empty(); }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Lowercases ASCII letters and splits on maximal runs of characters that are
/// neither ASCII alphanumerics nor part of a multi-byte UTF-8 sequence.
/// Keeps at most `max_len` tokens.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_len = kDefaultMaxLen);

enum class CorpusFormat { Jsonl, Tsv };

std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path);

struct LoadStats {
  std::size_t records = 0;
  std::size_t dropped_empty = 0;
};

/// Reads a labeled corpus. Throws MalformedRecord (with the 1-based line
/// number) or UnknownLabel. Records that tokenize to nothing are dropped and
/// counted in `stats`.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LabelSet& labels, std::size_t max_len = kDefaultMaxLen,
                   LoadStats* stats = nullptr);

/// Writes the jsonl encoding; text is the space-joined token list.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus_tsv(const Corpus& corpus, const std::filesystem::path& path);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Seeded uniform shuffle followed by partitioning into train/val/test.
std::array<Corpus, 3> split(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed);

struct SynthConfig {
  std::size_t num_classes = 6;
  std::size_t class_keyword_count = 20;
  std::size_t shared_vocab_size = 500;
  std::size_t domain_noise_vocab_size = 400;
  std::size_t doc_length_min = 10;
  std::size_t doc_length_max = 30;
  double keyword_rate = 0.3;
  std::size_t docs_per_class_source = 300;
  std::size_t docs_per_class_target = 60;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
};

struct SynthCorpora {
  Corpus source;
  Corpus target;
};

/// Two-domain corpus pair sharing class keywords but not noise vocabulary.
///
/// Each class owns `class_keyword_count` keywords drawn without replacement
/// from a shared vocabulary. Every token of a document is a keyword of its
/// class with probability `keyword_rate`, otherwise a noise token from the
/// domain's own vocabulary. Noise ranks follow a 1/(r+1) law whose rank order
/// is rotated per class, so noise carries weak class signal that does not
/// transfer between domains.
SynthCorpora synth_generate(const SynthConfig& config);

/// The per-class keyword lists `synth_generate` uses for `config`.
std::vector<std::vector<std::string>> synth_keywords(const SynthConfig& config);

}  // namespace textshift
