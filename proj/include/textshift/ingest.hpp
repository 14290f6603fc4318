#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "textshift/corpus.hpp"

namespace textshift {

struct IngestConfig {
  std::string base_url;  // scheme://host[:port]/path
  std::optional<std::string> api_key;
  std::string api_key_param = "key";
  std::string query_field_name = "q";
  std::string offset_param = "start";
  std::string limit_param = "limit";
  std::size_t per_request_limit = 25;
  std::size_t max_records_per_label = 1000;
  std::int64_t min_interval_ms = 1000;
  std::int64_t timeout_ms = 10000;
  std::string results_path = "/results";  // JSON pointer to the record array
  std::string text_path = "/snippet";     // JSON pointer inside one record
  std::size_t max_pages = 1000;
  std::size_t max_consecutive_failures = 3;

  void validate() const;
  /// Keys mirror the field names; unknown keys are rejected.
  static IngestConfig from_json(const nlohmann::json& j);
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using QueryParams = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws Error(Timeout) or Error(HttpError) when no response arrives.
  virtual HttpResponse get(const std::string& url, const QueryParams& params,
                           std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport.
class HttplibTransport : public HttpTransport {
 public:
  HttpResponse get(const std::string& url, const QueryParams& params,
                   std::chrono::milliseconds timeout) override;
};

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
};

class SystemClock : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_until(time_point t) override;
};

struct RawRecord {
  std::string label;
  std::string text;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct FetchReport {
  std::vector<RawRecord> records;
  std::size_t pages_requested = 0;
  std::size_t pages_failed = 0;
  std::vector<std::string> errors;  // one entry per skipped page or record
};

/// Pages through the API using `label` as the keyword, keeping unique texts
/// until max_records_per_label, an empty or short page, a page with nothing
/// new, or too many consecutive failures. Consecutive requests are spaced by
/// at least min_interval_ms on `clock`. Page failures are recorded and skipped.
FetchReport fetch_snippets(const IngestConfig& config, const std::string& label,
                           HttpTransport& transport, Clock& clock);

using TransportFactory = std::function<std::unique_ptr<HttpTransport>()>;

/// One independent fetch loop (own transport and rate limit) per label, run
/// on up to `threads` workers. Reports come back in label order.
std::vector<FetchReport> fetch_labels(const IngestConfig& config, const LabelSet& labels,
                                      std::size_t threads, const TransportFactory& make_transport);

/// Corpus jsonl records with the raw text, ids "<label index>-<n>", domain source.
void write_raw_jsonl(const std::vector<RawRecord>& records, const std::filesystem::path& path);

}  // namespace textshift
