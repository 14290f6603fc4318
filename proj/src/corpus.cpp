#include "textshift/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "textshift/error.hpp"
#include "textshift/io.hpp"
#include "textshift/rng.hpp"

namespace textshift {

using nlohmann::json;

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw Error(ErrorCode::InvalidConfig, "label set is empty");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw Error(ErrorCode::InvalidConfig, "empty label name");
    if (!index_.emplace(names_[i], i).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate label name '" + names_[i] + "'");
    }
  }
}

std::optional<std::size_t> LabelSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelSet job_categories() {
  return LabelSet({
      "Accounting/Finance",
      "Healthcare",
      "Non-Profit/Volunteering",
      "Administrative",
      "Computer/Internet",
      "Pharmaceutical/Bio-tech",
      "Arts/Entertainment/Publishing",
      "Hospitality/Travel",
      "Real Estate",
      "Banking/Loans",
      "Human Resources",
      "Restaurant/Food service",
      "Construction/Facilities",
      "Insurance",
      "Retail",
      "Customer Service",
      "Law Enforcement/Security",
      "Sales",
      "Education/Training",
      "Legal",
      "Telecommunications",
      "Engineering/Architecture",
      "Manufacturing/Mechanical",
      "Transportation/Logistics",
      "Government/Military",
      "Marketing/Advertising/PR",
      "Upper Management/Consulting",
  });
}

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

LabelSet load_label_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open label file " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (is_blank(line)) continue;
    names.push_back(line);
  }
  return LabelSet(std::move(names));
}

void write_label_set(const LabelSet& labels, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& name : labels.names()) out << name << '\n';
  });
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::Source: return "source";
    case Domain::Target: return "target";
    case Domain::Other: return "other";
  }
  return "other";
}

std::optional<Domain> parse_domain(std::string_view text) {
  if (text == "source") return Domain::Source;
  if (text == "target") return Domain::Target;
  if (text == "other") return Domain::Other;
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text, std::size_t max_len) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    if (tokens.size() >= max_len) break;
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') {
      current += static_cast<char>(c - 'A' + 'a');
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      current += ch;
    } else {
      flush();
    }
  }
  if (tokens.size() < max_len) flush();
  return tokens;
}

std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return CorpusFormat::Jsonl;
  if (ext == ".tsv" || ext == ".txt") return CorpusFormat::Tsv;
  return std::nullopt;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LabelSet& labels, std::size_t max_len, LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open corpus " + path.string());

  Corpus corpus{labels, {}};
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedRecord,
                 path.string() + " line " + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;

    std::string label_name;
    std::string text;
    std::string id = std::to_string(line_no);
    Domain domain = Domain::Source;

    if (format == CorpusFormat::Jsonl) {
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        throw malformed(e.what());
      }
      if (!record.is_object()) throw malformed("record is not an object");
      if (!record.contains("label") || !record["label"].is_string()) {
        throw malformed("missing string field 'label'");
      }
      if (!record.contains("text") || !record["text"].is_string()) {
        throw malformed("missing string field 'text'");
      }
      label_name = record["label"].get<std::string>();
      text = record["text"].get<std::string>();
      if (record.contains("id")) {
        if (record["id"].is_string()) {
          id = record["id"].get<std::string>();
        } else if (record["id"].is_number_integer()) {
          id = std::to_string(record["id"].get<long long>());
        } else {
          throw malformed("field 'id' must be a string or integer");
        }
      }
      if (record.contains("domain")) {
        if (!record["domain"].is_string()) throw malformed("field 'domain' must be a string");
        auto parsed = parse_domain(record["domain"].get<std::string>());
        if (!parsed) throw malformed("unknown domain '" + record["domain"].get<std::string>() + "'");
        domain = *parsed;
      }
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw malformed("expected label<TAB>text");
      label_name = line.substr(0, tab);
      text = line.substr(tab + 1);
    }

    ++local.records;
    auto label = labels.index_of(label_name);
    if (!label) {
      throw Error(ErrorCode::UnknownLabel,
                  "'" + label_name + "' at " + path.string() + " line " + std::to_string(line_no));
    }
    auto tokens = tokenize(text, max_len);
    if (tokens.empty()) {
      ++local.dropped_empty;
      continue;
    }
    corpus.documents.push_back(Document{*label, std::move(tokens), domain, std::move(id)});
  }
  if (stats) *stats = local;
  return corpus;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text += ' ';
    text += tokens[i];
  }
  return text;
}

}  // namespace

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& doc : corpus.documents) {
      json record;
      record["id"] = doc.id;
      record["label"] = corpus.label_set.name(doc.label);
      record["text"] = join_tokens(doc.tokens);
      record["domain"] = std::string(to_string(doc.domain));
      out << record.dump() << '\n';
    }
  });
}

void write_corpus_tsv(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& doc : corpus.documents) {
      out << corpus.label_set.name(doc.label) << '\t' << join_tokens(doc.tokens) << '\n';
    }
  });
}

std::array<Corpus, 3> split(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t wanted = sizes.train + sizes.val + sizes.test;
  if (wanted > corpus.size()) {
    throw Error(ErrorCode::InsufficientData, "requested " + std::to_string(wanted) +
                                                 " documents but corpus has " +
                                                 std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  std::array<Corpus, 3> parts{Corpus{corpus.label_set, {}}, Corpus{corpus.label_set, {}},
                              Corpus{corpus.label_set, {}}};
  const std::array<std::size_t, 3> counts{sizes.train, sizes.val, sizes.test};
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    parts[p].documents.reserve(counts[p]);
    for (std::size_t i = 0; i < counts[p]; ++i) {
      parts[p].documents.push_back(corpus.documents[order[cursor++]]);
    }
  }
  return parts;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (num_classes == 0 || class_keyword_count == 0 || shared_vocab_size == 0 ||
      domain_noise_vocab_size == 0 || doc_length_min == 0 || docs_per_class_source == 0 ||
      docs_per_class_target == 0) {
    fail("synth counts must be positive");
  }
  if (doc_length_max < doc_length_min) fail("doc_length_max < doc_length_min");
  if (!(keyword_rate > 0.0 && keyword_rate <= 1.0)) fail("keyword_rate must lie in (0, 1]");
  if (num_classes * class_keyword_count > shared_vocab_size) {
    fail("shared_vocab_size too small for disjoint class keyword sets");
  }
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return prefix + digits;
}

LabelSet synth_labels(std::size_t num_classes) {
  auto jobs = job_categories();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) {
    names.push_back(c < jobs.size() ? jobs.name(c) : numbered("class", c));
  }
  return LabelSet(std::move(names));
}

std::vector<std::vector<std::string>> draw_keywords(const SynthConfig& config, Rng& rng) {
  std::vector<std::size_t> pool(config.shared_vocab_size);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  rng.shuffle(pool);
  std::vector<std::vector<std::string>> keywords(config.num_classes);
  std::size_t cursor = 0;
  for (auto& list : keywords) {
    for (std::size_t j = 0; j < config.class_keyword_count; ++j) {
      list.push_back(numbered("w", pool[cursor++]));
    }
  }
  return keywords;
}

}  // namespace

std::vector<std::vector<std::string>> synth_keywords(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  return draw_keywords(config, rng);
}

SynthCorpora synth_generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto keywords = draw_keywords(config, rng);
  const auto labels = synth_labels(config.num_classes);

  // Cumulative 1/(r+1) weights over noise ranks.
  const std::size_t noise_size = config.domain_noise_vocab_size;
  std::vector<double> cdf(noise_size);
  double total = 0.0;
  for (std::size_t r = 0; r < noise_size; ++r) {
    total += 1.0 / static_cast<double>(r + 1);
    cdf[r] = total;
  }
  const std::size_t stride = std::max<std::size_t>(1, noise_size / config.num_classes);

  auto generate = [&](Domain domain, const char* noise_prefix, const char* id_prefix,
                      std::size_t per_class) {
    Corpus corpus{labels, {}};
    corpus.documents.reserve(per_class * config.num_classes);
    std::size_t serial = 0;
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      for (std::size_t d = 0; d < per_class; ++d) {
        const std::size_t span = config.doc_length_max - config.doc_length_min + 1;
        const std::size_t length = config.doc_length_min + rng.index(span);
        Document doc;
        doc.label = c;
        doc.domain = domain;
        doc.id = numbered(id_prefix, serial++);
        doc.tokens.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
          if (rng.bernoulli(config.keyword_rate)) {
            doc.tokens.push_back(keywords[c][rng.index(config.class_keyword_count)]);
          } else {
            const double u = rng.uniform01() * total;
            const auto rank = static_cast<std::size_t>(
                std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            const std::size_t slot = (std::min(rank, noise_size - 1) + c * stride) % noise_size;
            doc.tokens.push_back(numbered(noise_prefix, slot));
          }
        }
        corpus.documents.push_back(std::move(doc));
      }
    }
    return corpus;
  };

  SynthCorpora out;
  out.source = generate(Domain::Source, "s", "src-", config.docs_per_class_source);
  out.target = generate(Domain::Target, "t", "tgt-", config.docs_per_class_target);
  return out;
}

}  // namespace textshift
