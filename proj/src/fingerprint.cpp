#include "forgescope/fingerprint.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

#include <arpa/inet.h>
#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"
#include "forgescope/jsonl.hpp"
#include "forgescope/parallel.hpp"
#include "forgescope/text.hpp"

namespace forgescope {

using nlohmann::json;

std::string_view to_string(ForgeKind kind) {
  switch (kind) {
    case ForgeKind::GitLabCE: return "GitLabCE";
    case ForgeKind::Gogs: return "Gogs";
    case ForgeKind::Gitea: return "Gitea";
    case ForgeKind::Unknown: return "Unknown";
  }
  return "Unknown";
}

ForgeKind forge_kind_from_string(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "gitlabce" || lower == "gitlab") return ForgeKind::GitLabCE;
  if (lower == "gogs") return ForgeKind::Gogs;
  if (lower == "gitea") return ForgeKind::Gitea;
  if (lower == "unknown") return ForgeKind::Unknown;
  throw std::invalid_argument("unknown forge kind: " + std::string(s));
}

int precedence(ForgeKind kind) {
  switch (kind) {
    case ForgeKind::Gitea: return 3;
    case ForgeKind::Gogs: return 2;
    case ForgeKind::GitLabCE: return 1;
    case ForgeKind::Unknown: return 0;
  }
  return 0;
}

FingerprintRule::FingerprintRule(ForgeKind kind, std::string marker, std::optional<std::string> version_pattern)
    : kind_(kind), marker_(std::move(marker)), version_pattern_(std::move(version_pattern)) {
  if (kind_ == ForgeKind::Unknown) throw std::invalid_argument("fingerprint rule needs a concrete forge kind");
  if (marker_.empty()) throw std::invalid_argument("fingerprint marker must be non-empty");
  if (version_pattern_ && !version_pattern_->empty()) {
    try {
      version_regex_ = std::make_shared<const std::regex>(*version_pattern_, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw std::invalid_argument("bad version pattern '" + *version_pattern_ + "': " + e.what());
    }
  } else {
    version_pattern_.reset();
  }
}

std::optional<std::string> FingerprintRule::extract_version(const std::string& page) const {
  if (!version_regex_) return std::nullopt;
  std::smatch m;
  if (!std::regex_search(page, m, *version_regex_)) return std::nullopt;
  const auto& group = m.size() > 1 && m[1].matched ? m[1] : m[0];
  std::string v = group.str();
  if (v.empty()) return std::nullopt;
  return v;
}

std::vector<FingerprintRule> default_rules() {
  std::vector<FingerprintRule> rules;
  rules.emplace_back(ForgeKind::Gitea, "Powered by Gitea",
                     R"(Version:\s*(?:<[^>]*>\s*)*([0-9]+\.[0-9]+[0-9A-Za-z.+\-]*))");
  rules.emplace_back(ForgeKind::Gogs, "Gogs is a painless self-hosted Git service",
                     R"(Gogs\s+Version:\s*([0-9]+\.[0-9]+[0-9A-Za-z.+\-]*))");
  rules.emplace_back(ForgeKind::GitLabCE, R"(<meta content="GitLab" property="og:site_name">)");
  return rules;
}

void validate_rules(std::span<const FingerprintRule> rules) {
  std::map<std::string, ForgeKind> seen;
  for (const auto& r : rules) {
    const auto [it, inserted] = seen.emplace(r.marker(), r.kind());
    if (!inserted && it->second != r.kind())
      throw std::invalid_argument("marker shared by " + std::string(to_string(it->second)) + " and " +
                                  std::string(to_string(r.kind())) + ": " + r.marker());
  }
}

std::vector<FingerprintRule> load_rules(const std::filesystem::path& path) {
  std::vector<FingerprintRule> rules;
  jsonl::for_each(path, [&](const json& j, std::size_t line) {
    try {
      std::optional<std::string> pattern;
      if (j.contains("version_pattern") && j["version_pattern"].is_string())
        pattern = j["version_pattern"].get<std::string>();
      rules.emplace_back(forge_kind_from_string(j.at("kind").get<std::string>()), j.at("marker").get<std::string>(),
                         pattern);
    } catch (const std::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  if (rules.empty()) throw InputError(path.string() + ": no fingerprint rules");
  validate_rules(rules);
  return rules;
}

Detection detect_forge(std::string_view html, std::span<const FingerprintRule> rules) {
  if (html.empty() || rules.empty()) return {};
  const std::string page = text::decode_lenient(html);
  std::vector<const FingerprintRule*> ordered;
  ordered.reserve(rules.size());
  for (const auto& r : rules) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return precedence(a->kind()) > precedence(b->kind());
  });
  for (const auto* rule : ordered) {
    if (page.find(rule->marker()) != std::string::npos) return {rule->kind(), rule->extract_version(page)};
  }
  return {};
}

// ---------------------------------------------------------------------------

std::string HostKey::origin() const {
  http::Url u;
  u.scheme = scheme;
  u.host = address;
  u.port = port;
  return u.origin();
}

std::string HostKey::id() const {
  const std::string addr = address.find(':') != std::string::npos ? "[" + address + "]" : address;
  return addr + ":" + std::to_string(port) + "/" + std::string(http::to_string(scheme));
}

void to_json(json& j, const HostKey& k) {
  j = json{{"address", k.address}, {"port", k.port}, {"scheme", http::to_string(k.scheme)}};
}

void from_json(const json& j, HostKey& k) {
  k.address = text::to_lower(j.at("address").get<std::string>());
  k.scheme = j.contains("scheme") ? http::scheme_from_string(j.at("scheme").get<std::string>()) : http::Scheme::Https;
  if (j.contains("port")) {
    const auto port = j.at("port").get<long long>();
    if (port < 1 || port > 65535) throw std::invalid_argument("port out of range");
    k.port = static_cast<std::uint16_t>(port);
  } else {
    k.port = http::default_port(k.scheme);
  }
}

void to_json(json& j, const HostRecord& r) {
  to_json(j, r.key);
  j["kind"] = to_string(r.kind);
  j["version"] = r.version ? json(*r.version) : json(nullptr);
  j["observed_at"] = format_iso8601(r.observed_at);
  if (!r.annotations.empty()) j["annotations"] = r.annotations;
}

void from_json(const json& j, HostRecord& r) {
  from_json(j, r.key);
  r.kind = j.contains("kind") ? forge_kind_from_string(j.at("kind").get<std::string>()) : ForgeKind::Unknown;
  r.version.reset();
  if (j.contains("version") && j["version"].is_string()) r.version = j["version"].get<std::string>();
  if (r.kind == ForgeKind::Unknown) r.version.reset();
  if (j.contains("observed_at") && j["observed_at"].is_string())
    r.observed_at = parse_iso8601_or_throw(j["observed_at"].get<std::string>());
  r.annotations.clear();
  if (j.contains("annotations")) r.annotations = j["annotations"].get<std::vector<std::string>>();
}

void merge_host(std::vector<HostRecord>& records, HostRecord incoming) {
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const HostRecord& r) { return r.key == incoming.key; });
  if (it == records.end()) {
    records.push_back(std::move(incoming));
    return;
  }
  if (precedence(incoming.kind) > precedence(it->kind)) {
    it->kind = incoming.kind;
    it->version = incoming.version;
  }
  for (auto& a : incoming.annotations) {
    if (std::find(it->annotations.begin(), it->annotations.end(), a) == it->annotations.end())
      it->annotations.push_back(std::move(a));
  }
}

namespace {

bool valid_hostname(std::string_view h) {
  if (h.empty() || h.size() > 253) return false;
  for (const auto label : text::split(h, '.')) {
    if (label.empty() || label.size() > 63) return false;
    if (label.front() == '-' || label.back() == '-') return false;
    for (const char c : label) {
      const auto uc = static_cast<unsigned char>(c);
      if (!std::isalnum(uc) && c != '-' && c != '_') return false;
    }
  }
  return true;
}

bool valid_ipv6(const std::string& h) {
  std::array<unsigned char, 16> buf{};
  return inet_pton(AF_INET6, h.c_str(), buf.data()) == 1;
}

}  // namespace

std::optional<HostKey> parse_host_entry(std::string_view entry, std::string* error) {
  auto fail = [&](std::string msg) -> std::optional<HostKey> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };
  entry = text::trim(entry);
  if (entry.empty()) return fail("empty entry");
  std::optional<http::Scheme> scheme;
  if (const auto sep = entry.find("://"); sep != std::string_view::npos) {
    try {
      scheme = http::scheme_from_string(entry.substr(0, sep));
    } catch (const std::invalid_argument& e) {
      return fail(e.what());
    }
    entry.remove_prefix(sep + 3);
  }
  while (!entry.empty() && entry.back() == '/') entry.remove_suffix(1);
  if (entry.find('/') != std::string_view::npos) return fail("unexpected path component");

  std::string host;
  std::string_view port_text;
  if (!entry.empty() && entry.front() == '[') {
    const auto close = entry.find(']');
    if (close == std::string_view::npos) return fail("unterminated IPv6 literal");
    host = std::string(entry.substr(1, close - 1));
    const auto rest = entry.substr(close + 1);
    if (!rest.empty()) {
      if (rest.front() != ':') return fail("junk after IPv6 literal");
      port_text = rest.substr(1);
    }
    if (!valid_ipv6(host)) return fail("invalid IPv6 address");
  } else {
    const auto colon = entry.find(':');
    if (colon != std::string_view::npos && entry.find(':', colon + 1) != std::string_view::npos) {
      host = std::string(entry);  // bare IPv6 without brackets, no port
      if (!valid_ipv6(host)) return fail("invalid address");
    } else {
      host = std::string(entry.substr(0, colon));
      if (colon != std::string_view::npos) port_text = entry.substr(colon + 1);
      if (!valid_hostname(host)) return fail("invalid hostname");
    }
  }

  HostKey key;
  key.address = text::to_lower(host);
  if (port_text.empty()) {
    if (entry.find(':') != std::string_view::npos && entry.front() != '[' &&
        std::count(entry.begin(), entry.end(), ':') == 1)
      return fail("empty port");
    key.scheme = scheme.value_or(http::Scheme::Https);
    key.port = http::default_port(key.scheme);
    return key;
  }
  long port = 0;
  for (const char c : port_text) {
    if (c < '0' || c > '9') return fail("non-numeric port");
    port = port * 10 + (c - '0');
    if (port > 65535) return fail("port out of range");
  }
  if (port < 1) return fail("port out of range");
  key.port = static_cast<std::uint16_t>(port);
  key.scheme = scheme.value_or(key.port == 443 ? http::Scheme::Https : http::Scheme::Http);
  return key;
}

HostIngest ingest_host_list(const std::filesystem::path& path, Timestamp now) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read host list " + path.string());
  HostIngest out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    HostRecord record;
    record.observed_at = now;
    if (trimmed.front() == '{') {
      try {
        const auto j = json::parse(trimmed);
        from_json(j, record);
        if (!j.contains("observed_at")) record.observed_at = now;
        if (record.observed_at > now) record.observed_at = now;
      } catch (const std::exception& e) {
        out.skipped.push_back({line_no, std::string(trimmed), e.what()});
        continue;
      }
    } else {
      std::string error;
      const auto key = parse_host_entry(trimmed, &error);
      if (!key) {
        out.skipped.push_back({line_no, std::string(trimmed), error});
        continue;
      }
      record.key = *key;
    }
    merge_host(out.records, std::move(record));
  }
  return out;
}

void export_host_list(const std::filesystem::path& path, std::span<const HostRecord> records) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.emplace_back(r);
  jsonl::write_all(path, lines);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ScanErrorKind kind) {
  switch (kind) {
    case ScanErrorKind::Authentication: return "authentication";
    case ScanErrorKind::Quota: return "quota";
    case ScanErrorKind::Transport: return "transport";
  }
  return "transport";
}

ShodanClient ShodanClient::from_environment(http::Fetcher& fetcher, const http::Url& base, const std::string& key_env) {
  const char* key = std::getenv(key_env.c_str());
  if (key == nullptr || *key == '\0') throw ConfigError("scan API key variable " + key_env + " is not set");
  return ShodanClient(fetcher, base, key);
}

ScanPage ShodanClient::search(std::string_view marker, int page) {
  http::Url url = base_;
  std::string prefix = url.target == "/" ? "" : url.target;
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const std::string query = "http.html:\"" + std::string(marker) + "\"";
  url.target = prefix + "/shodan/host/search?key=" + text::url_encode(api_key_) +
               "&query=" + text::url_encode(query) + "&page=" + std::to_string(page);
  const auto result = fetcher_.get(url);
  if (const auto* err = std::get_if<http::TransportError>(&result))
    throw ScanApiError(ScanErrorKind::Transport, err->message);
  const auto& response = std::get<http::Response>(result);
  if (response.status == 401 || response.status == 403)
    throw ScanApiError(ScanErrorKind::Authentication, "scan API rejected credentials (HTTP " +
                                                           std::to_string(response.status) + ")");
  if (response.status == 402 || response.status == 429)
    throw ScanApiError(ScanErrorKind::Quota, "scan API quota exhausted (HTTP " + std::to_string(response.status) + ")");
  if (response.status != 200)
    throw ScanApiError(ScanErrorKind::Transport, "scan API returned HTTP " + std::to_string(response.status));
  ScanPage out;
  try {
    const auto j = json::parse(response.body);
    for (const auto& m : j.value("matches", json::array())) {
      ScanHit hit;
      hit.address = m.at("ip_str").get<std::string>();
      hit.port = m.at("port").get<std::uint16_t>();
      if (m.contains("ssl")) hit.scheme = http::Scheme::Https;
      out.hits.push_back(std::move(hit));
    }
    const auto total = j.value("total", 0LL);
    out.has_more = !out.hits.empty() && static_cast<long long>(page) * 100 < total;
  } catch (const std::exception& e) {
    throw ScanApiError(ScanErrorKind::Transport, std::string("malformed scan API response: ") + e.what());
  }
  return out;
}

ScanOutcome query_scan_api(ScanApiClient& client, std::span<const FingerprintRule> rules, const ScanLimits& limits,
                           Timestamp now) {
  ScanOutcome out;
  for (const auto& rule : rules) {
    for (int page = 1;; ++page) {
      if (page > limits.max_pages_per_rule) {
        out.warnings.push_back("page cap reached for marker of " + std::string(to_string(rule.kind())));
        break;
      }
      ScanPage result;
      try {
        result = client.search(rule.marker(), page);
      } catch (const ScanApiError& e) {
        out.error = e.kind();
        out.warnings.push_back(std::string(to_string(e.kind())) + " error: " + e.what() +
                               " (returning partial results)");
        return out;
      }
      for (const auto& hit : result.hits) {
        HostRecord record;
        record.key.address = text::to_lower(hit.address);
        record.key.port = hit.port;
        record.key.scheme = hit.scheme.value_or(hit.port == 443 ? http::Scheme::Https : http::Scheme::Http);
        record.kind = rule.kind();
        record.observed_at = now;
        merge_host(out.records, std::move(record));
      }
      if (!result.has_more) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

HostRecord probe_host(const HostRecord& host, http::Fetcher& fetcher, std::span<const FingerprintRule> rules,
                      Timestamp now) {
  HostRecord out = host;
  out.observed_at = now;
  http::Url url;
  url.scheme = host.key.scheme;
  url.host = host.key.address;
  url.port = host.key.port;
  url.target = "/";
  const auto outcome = http::get_following(fetcher, url, 5);
  if (const auto* err = std::get_if<http::TransportError>(&outcome.result)) {
    out.kind = ForgeKind::Unknown;
    out.version.reset();
    out.annotations.push_back("unreachable: " + std::string(http::to_string(err->kind)) + ": " + err->message);
    return out;
  }
  if (outcome.cross_domain_target)
    out.annotations.push_back("front page redirects off-domain to " + outcome.cross_domain_target->str());
  const auto& response = std::get<http::Response>(outcome.result);
  const auto detection = detect_forge(response.body, rules);
  out.kind = detection.kind;
  out.version = detection.version;
  return out;
}

std::vector<HostRecord> probe_hosts(std::span<const HostRecord> hosts, http::Fetcher& fetcher,
                                    std::span<const FingerprintRule> rules, std::size_t max_concurrent) {
  std::vector<HostRecord> out(hosts.size());
  const auto now = now_utc();
  parallel_for(hosts.size(), max_concurrent, [&](std::size_t i) { out[i] = probe_host(hosts[i], fetcher, rules, now); });
  return out;
}

}  // namespace forgescope
