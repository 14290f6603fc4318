#include "textshift/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "textshift/error.hpp"
#include "textshift/io.hpp"
#include "textshift/training.hpp"

namespace textshift {

FrequencyProfile frequency_profile(const Corpus& corpus) {
  FrequencyProfile profile;
  for (const auto& doc : corpus.documents) {
    for (const auto& token : doc.tokens) ++profile.counts[token];
    profile.total_tokens += doc.tokens.size();
  }
  if (profile.total_tokens == 0) throw Error(ErrorCode::EmptyCorpus, "corpus has no tokens");
  const double total = static_cast<double>(profile.total_tokens);
  for (const auto& [token, count] : profile.counts) {
    profile.frequency.emplace(token, static_cast<double>(count) / total);
  }
  return profile;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "pearson needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<RatioRow> top_rows(const std::vector<TokenComparison>& shared, bool a_over_b,
                               std::size_t top_k) {
  std::vector<RatioRow> rows;
  rows.reserve(shared.size());
  for (const auto& t : shared) {
    rows.push_back({0, t.token, t.f_a, t.f_b, a_over_b ? t.f_a / t.f_b : t.f_b / t.f_a});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RatioRow& x, const RatioRow& y) { return x.ratio > y.ratio; });
  if (rows.size() > top_k) rows.resize(top_k);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

}  // namespace

DomainComparison compare_domains(const Corpus& a, const Corpus& b, std::size_t min_count,
                                 std::size_t top_k) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCorpus, "both corpora must be non-empty");
  const auto pa = frequency_profile(a);
  const auto pb = frequency_profile(b);

  DomainComparison out;
  for (const auto& [token, count_a] : pa.counts) {
    if (count_a < min_count) continue;
    auto it = pb.counts.find(token);
    if (it == pb.counts.end() || it->second < min_count) continue;
    const double fa = pa.frequency.at(token);
    const double fb = pb.frequency.at(token);
    out.shared.push_back({token, count_a, it->second, fa, fb, fa / fb});
  }
  if (out.shared.empty()) {
    throw Error(ErrorCode::NoSharedTokens,
                "no token reaches min_count " + std::to_string(min_count) + " in both corpora");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& t : out.shared) {
    xs.push_back(t.f_a);
    ys.push_back(t.f_b);
  }
  out.rho = pearson(xs, ys);
  out.a_over_b = top_rows(out.shared, true, top_k);
  out.b_over_a = top_rows(out.shared, false, top_k);
  return out;
}

void write_comparison_report(const DomainComparison& comparison, std::ostream& out) {
  auto table = [&](const std::vector<RatioRow>& rows) {
    out << "rank,word,f_a,f_b,ratio\n";
    for (const auto& r : rows) {
      out << r.rank << ',' << csv_field(r.token) << ',' << format_double(r.f_a) << ','
          << format_double(r.f_b) << ',' << format_double(r.ratio) << '\n';
    }
  };
  table(comparison.a_over_b);
  out << '\n';
  table(comparison.b_over_a);
  out << '\n';
  out << "rho,shared_tokens\n"
      << format_double(comparison.rho) << ',' << comparison.shared.size() << '\n';
}

void write_comparison_report(const DomainComparison& comparison, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) { write_comparison_report(comparison, out); });
}

std::vector<double> extract_features(const CnnModel& model, const std::vector<std::string>& tokens) {
  return pooled_features(model, encode_tokens(model.vocab, tokens));
}

Matrix extract_feature_matrix(const CnnModel& model, const Corpus& corpus, std::size_t threads) {
  Matrix features(corpus.size(), model.num_features());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto z = extract_features(model, corpus.documents[i].tokens);
    std::copy(z.begin(), z.end(), features.row(i).begin());
  });
  return features;
}

void export_projection(const Matrix& coords, const Corpus& corpus,
                       const std::filesystem::path& path) {
  if (coords.rows() != corpus.size() || (coords.rows() > 0 && coords.cols() < 2)) {
    throw Error(ErrorCode::ShapeMismatch, "projection rows do not match the corpus");
  }
  write_file_atomic(path, [&](std::ostream& out) {
    out << "id,x,y,label_name,domain_tag\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& doc = corpus.documents[i];
      out << csv_field(doc.id) << ',' << format_double(coords(i, 0)) << ','
          << format_double(coords(i, 1)) << ',' << csv_field(corpus.label_set.name(doc.label)) << ','
          << to_string(doc.domain) << '\n';
    }
  });
}

std::vector<ProjectionRow> read_projection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "id,x,y,label_name,domain_tag") {
    throw Error(ErrorCode::MalformedRecord, "unexpected projection header");
  }
  std::vector<ProjectionRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = parse_csv_line(line);
    if (fields.size() != 5) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": expected 5 fields");
    }
    try {
      rows.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2]), fields[3], fields[4]});
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": bad coordinate");
    }
  }
  return rows;
}

}  // namespace textshift
