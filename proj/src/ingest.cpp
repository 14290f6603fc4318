#include "textshift/ingest.hpp"

#include <set>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "textshift/error.hpp"
#include "textshift/io.hpp"
#include "textshift/training.hpp"

namespace textshift {

using nlohmann::json;

void IngestConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (base_url.empty()) fail("base_url is required");
  if (base_url.rfind("http://", 0) != 0) fail("base_url must start with http:// (built without TLS)");
  if (per_request_limit == 0) fail("per_request_limit must be > 0");
  if (min_interval_ms < 0) fail("min_interval_ms must be >= 0");
  if (timeout_ms <= 0) fail("timeout_ms must be > 0");
  if (query_field_name.empty()) fail("query_field_name must be non-empty");
  if (max_pages == 0) fail("max_pages must be > 0");
  if (max_consecutive_failures == 0) fail("max_consecutive_failures must be > 0");
  try {
    (void)json::json_pointer(results_path);
    (void)json::json_pointer(text_path);
  } catch (const json::exception& e) {
    fail(std::string("bad JSON pointer: ") + e.what());
  }
}

IngestConfig IngestConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "ingest config must be a JSON object");
  static const std::set<std::string> known{
      "base_url",    "api_key",           "api_key_param",  "query_field_name",
      "offset_param", "limit_param",      "per_request_limit", "max_records_per_label",
      "min_interval_ms", "timeout_ms",    "results_path",   "text_path",
      "max_pages",   "max_consecutive_failures"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown ingest key '" + key + "'");
  }
  IngestConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("base_url", c.base_url);
    if (j.contains("api_key") && !j.at("api_key").is_null()) {
      c.api_key = j.at("api_key").get<std::string>();
    }
    get("api_key_param", c.api_key_param);
    get("query_field_name", c.query_field_name);
    get("offset_param", c.offset_param);
    get("limit_param", c.limit_param);
    get("per_request_limit", c.per_request_limit);
    get("max_records_per_label", c.max_records_per_label);
    get("min_interval_ms", c.min_interval_ms);
    get("timeout_ms", c.timeout_ms);
    get("results_path", c.results_path);
    get("text_path", c.text_path);
    get("max_pages", c.max_pages);
    get("max_consecutive_failures", c.max_consecutive_failures);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("ingest config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidConfig, "URL lacks a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpResponse HttplibTransport::get(const std::string& url, const QueryParams& params,
                                   std::chrono::milliseconds timeout) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  httplib::Params query;
  for (const auto& [k, v] : params) query.emplace(k, v);
  auto result = client.Get(parts.path, query, httplib::Headers{});
  if (!result) {
    const auto err = result.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::Timeout, url + ": " + httplib::to_string(err));
    }
    throw Error(ErrorCode::HttpError, url + ": " + httplib::to_string(err));
  }
  return {result->status, result->body};
}

void SystemClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

FetchReport fetch_snippets(const IngestConfig& config, const std::string& label,
                           HttpTransport& transport, Clock& clock) {
  config.validate();
  if (label.empty()) throw Error(ErrorCode::InvalidConfig, "label must be non-empty");
  const json::json_pointer results_ptr(config.results_path);
  const json::json_pointer text_ptr(config.text_path);
  const auto interval = std::chrono::milliseconds(config.min_interval_ms);
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);

  FetchReport report;
  std::unordered_set<std::string> seen;
  std::optional<Clock::time_point> last_request;
  std::size_t consecutive_failures = 0;

  for (std::size_t page = 0; page < config.max_pages; ++page) {
    if (report.records.size() >= config.max_records_per_label) break;
    if (consecutive_failures >= config.max_consecutive_failures) break;

    if (last_request) clock.sleep_until(*last_request + interval);
    last_request = clock.now();
    ++report.pages_requested;

    QueryParams params{{config.query_field_name, label},
                       {config.offset_param, std::to_string(page * config.per_request_limit)},
                       {config.limit_param, std::to_string(config.per_request_limit)}};
    if (config.api_key) params.emplace_back(config.api_key_param, *config.api_key);

    auto fail_page = [&](const std::string& why) {
      ++report.pages_failed;
      ++consecutive_failures;
      report.errors.push_back("page " + std::to_string(page + 1) + ": " + why);
    };

    json results;
    try {
      const auto response = transport.get(config.base_url, params, timeout);
      if (response.status != 200) {
        throw Error(ErrorCode::HttpError, "status " + std::to_string(response.status));
      }
      json body;
      try {
        body = json::parse(response.body);
      } catch (const json::exception&) {
        throw Error(ErrorCode::MalformedResponse, "body is not JSON");
      }
      if (!body.contains(results_ptr) || !body.at(results_ptr).is_array()) {
        throw Error(ErrorCode::MalformedResponse, config.results_path + " is not an array");
      }
      results = std::move(body.at(results_ptr));
    } catch (const Error& e) {
      fail_page(e.what());
      continue;
    }
    consecutive_failures = 0;
    if (results.empty()) break;

    std::size_t fresh = 0;
    for (const auto& item : results) {
      if (report.records.size() >= config.max_records_per_label) break;
      if (!item.contains(text_ptr) || !item.at(text_ptr).is_string()) {
        report.errors.push_back("page " + std::to_string(page + 1) + ": " +
                                std::string(to_string(ErrorCode::MalformedResponse)) + ": " +
                                config.text_path);
        continue;
      }
      auto text = item.at(text_ptr).get<std::string>();
      if (seen.insert(text).second) {
        report.records.push_back({label, std::move(text)});
        ++fresh;
      }
    }
    if (fresh == 0 || results.size() < config.per_request_limit) break;
  }
  return report;
}

std::vector<FetchReport> fetch_labels(const IngestConfig& config, const LabelSet& labels,
                                      std::size_t threads, const TransportFactory& make_transport) {
  std::vector<FetchReport> reports(labels.size());
  parallel_for(labels.size(), threads, [&](std::size_t i) {
    auto transport = make_transport();
    SystemClock clock;
    reports[i] = fetch_snippets(config, labels.name(i), *transport, clock);
  });
  return reports;
}

void write_raw_jsonl(const std::vector<RawRecord>& records, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    std::size_t serial = 0;
    for (const auto& r : records) {
      json record{{"id", "ingest-" + std::to_string(serial++)},
                  {"label", r.label},
                  {"text", r.text},
                  {"domain", "source"}};
      out << record.dump() << '\n';
    }
  });
}

}  // namespace textshift
