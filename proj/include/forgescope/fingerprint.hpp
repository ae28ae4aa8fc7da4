#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forgescope/http.hpp"
#include "forgescope/time.hpp"

namespace forgescope {

enum class ForgeKind { GitLabCE, Gogs, Gitea, Unknown };

std::string_view to_string(ForgeKind kind);
ForgeKind forge_kind_from_string(std::string_view s);

/// Higher wins when several rules match one page: Gitea > Gogs > GitLabCE.
int precedence(ForgeKind kind);

class FingerprintRule {
 public:
  /// Throws std::invalid_argument for an empty marker, an Unknown kind, or a
  /// pattern that does not compile.
  FingerprintRule(ForgeKind kind, std::string marker, std::optional<std::string> version_pattern = std::nullopt);

  ForgeKind kind() const { return kind_; }
  const std::string& marker() const { return marker_; }
  const std::optional<std::string>& version_pattern() const { return version_pattern_; }

  /// First capture group of the version pattern (or the whole match).
  std::optional<std::string> extract_version(const std::string& page) const;

 private:
  ForgeKind kind_;
  std::string marker_;
  std::optional<std::string> version_pattern_;
  std::shared_ptr<const std::regex> version_regex_;
};

/// The three shipped rules, re-derived from each forge's default front page.
std::vector<FingerprintRule> default_rules();

/// JSON-lines rule file: {"kind": "...", "marker": "...", "version_pattern": "..."}.
/// Rejects rule sets where two kinds share a marker.
std::vector<FingerprintRule> load_rules(const std::filesystem::path& path);
void validate_rules(std::span<const FingerprintRule> rules);

struct Detection {
  ForgeKind kind = ForgeKind::Unknown;
  std::optional<std::string> version;
  bool operator==(const Detection&) const = default;
};

/// Pure. Bytes are decoded leniently before matching.
Detection detect_forge(std::string_view html, std::span<const FingerprintRule> rules);

struct HostKey {
  std::string address;
  std::uint16_t port = 443;
  http::Scheme scheme = http::Scheme::Https;

  auto operator<=>(const HostKey&) const = default;
  bool operator==(const HostKey&) const = default;

  /// "https://forge.example:3000" style origin.
  std::string origin() const;
  /// Stable identifier "<address>:<port>/<scheme>" used as a map key in stores.
  std::string id() const;
};

struct HostRecord {
  HostKey key;
  ForgeKind kind = ForgeKind::Unknown;
  std::optional<std::string> version;
  Timestamp observed_at{};
  std::vector<std::string> annotations;

  bool operator==(const HostRecord&) const = default;
};

void to_json(nlohmann::json& j, const HostKey& k);
void from_json(const nlohmann::json& j, HostKey& k);
void to_json(nlohmann::json& j, const HostRecord& r);
void from_json(const nlohmann::json& j, HostRecord& r);

/// Adds or merges into `records` keyed by HostKey. On collision the kind with
/// higher precedence wins and annotations accumulate.
void merge_host(std::vector<HostRecord>& records, HostRecord incoming);

struct SkippedLine {
  std::size_t line = 0;
  std::string text;
  std::string reason;
};

struct HostIngest {
  std::vector<HostRecord> records;
  std::vector<SkippedLine> skipped;
};

/// Parses one bare host entry: "[scheme://]host[:port][/]". Without a port the
/// scheme defaults to https/443; with a port and no scheme, 443 implies https
/// and anything else http.
std::optional<HostKey> parse_host_entry(std::string_view entry, std::string* error = nullptr);

/// Reads bare entries or JSON HostRecord lines; malformed lines are skipped
/// and reported. Throws InputError when the file cannot be read.
HostIngest ingest_host_list(const std::filesystem::path& path, Timestamp now = now_utc());

void export_host_list(const std::filesystem::path& path, std::span<const HostRecord> records);

// ---------------------------------------------------------------------------
// Scan-API import

struct ScanHit {
  std::string address;
  std::uint16_t port = 0;
  std::optional<http::Scheme> scheme;
};

struct ScanPage {
  std::vector<ScanHit> hits;
  bool has_more = false;
};

enum class ScanErrorKind { Authentication, Quota, Transport };
std::string_view to_string(ScanErrorKind kind);

class ScanApiError : public std::runtime_error {
 public:
  ScanApiError(ScanErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ScanErrorKind kind() const { return kind_; }

 private:
  ScanErrorKind kind_;
};

/// Search client over a scan provider. `page` starts at 1. Throws ScanApiError.
class ScanApiClient {
 public:
  virtual ~ScanApiClient() = default;
  virtual ScanPage search(std::string_view marker, int page) = 0;
};

/// Shodan-style host search: GET {base}/shodan/host/search?key=&query=&page=.
class ShodanClient final : public ScanApiClient {
 public:
  ShodanClient(http::Fetcher& fetcher, http::Url base, std::string api_key)
      : fetcher_(fetcher), base_(std::move(base)), api_key_(std::move(api_key)) {}

  /// Reads the key from `key_env`; throws ConfigError when unset.
  static ShodanClient from_environment(http::Fetcher& fetcher, const http::Url& base, const std::string& key_env);

  ScanPage search(std::string_view marker, int page) override;

 private:
  http::Fetcher& fetcher_;
  http::Url base_;
  std::string api_key_;
};

struct ScanLimits {
  int max_pages_per_rule = 100;
};

struct ScanOutcome {
  std::vector<HostRecord> records;
  std::vector<std::string> warnings;
  std::optional<ScanErrorKind> error;  // first error; records hold what was gathered before it
};

ScanOutcome query_scan_api(ScanApiClient& client, std::span<const FingerprintRule> rules,
                           const ScanLimits& limits = {}, Timestamp now = now_utc());

// ---------------------------------------------------------------------------
// Probing

/// Fetches the front page and applies detect_forge. Transport failures leave
/// the host Unknown with an "unreachable: ..." annotation.
HostRecord probe_host(const HostRecord& host, http::Fetcher& fetcher, std::span<const FingerprintRule> rules,
                      Timestamp now = now_utc());

/// probe_host over many hosts with at most `max_concurrent` open connections.
std::vector<HostRecord> probe_hosts(std::span<const HostRecord> hosts, http::Fetcher& fetcher,
                                    std::span<const FingerprintRule> rules, std::size_t max_concurrent);

}  // namespace forgescope
