#pragma once

#include <chrono>
#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forgescope/fingerprint.hpp"
#include "forgescope/http.hpp"
#include "forgescope/jsonl.hpp"
#include "forgescope/time.hpp"

namespace forgescope {

struct RepoRef {
  HostKey host;
  std::string owner;  // may contain '/' for nested GitLab groups
  std::string name;
  std::string clone_url;
  Timestamp discovered_at{};

  /// "<host id>/<owner>/<name>", unique within a corpus.
  std::string id() const;
  bool operator==(const RepoRef&) const = default;
};

void to_json(nlohmann::json& j, const RepoRef& r);
void from_json(const nlohmann::json& j, RepoRef& r);

enum class CrawlStatusKind { Listed, Unreachable, NoPublicRepos, LoginRequired };
std::string_view to_string(CrawlStatusKind k);
CrawlStatusKind crawl_status_from_string(std::string_view s);

struct HostCrawlStatus {
  CrawlStatusKind kind = CrawlStatusKind::Unreachable;
  std::size_t repo_count = 0;  // > 0 exactly when Listed
  bool operator==(const HostCrawlStatus&) const = default;
};

struct CrawlLimits {
  std::chrono::milliseconds min_interval{1000};  // per host
  std::size_t max_concurrent_hosts = 32;
  std::size_t max_pages = 10'000;
  std::size_t page_size = 50;
  int max_redirects = 5;
};

/// Enforces a minimum spacing between consecutive requests to one host.
class RequestPacer {
 public:
  explicit RequestPacer(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}

  void wait() {
    const auto now = std::chrono::steady_clock::now();
    if (last_ && now < *last_ + min_interval_) std::this_thread::sleep_until(*last_ + min_interval_);
    last_ = std::chrono::steady_clock::now();
  }

 private:
  std::chrono::milliseconds min_interval_;
  std::optional<std::chrono::steady_clock::time_point> last_;
};

struct HostCrawl {
  HostKey host;
  std::vector<RepoRef> repos;
  HostCrawlStatus status;
  std::vector<std::string> annotations;
};

/// Lists every public repository on a fingerprinted host through the forge's
/// JSON API, falling back to the HTML explore pages when the API is absent.
/// Never throws on bad server behaviour; problems become annotations.
HostCrawl enumerate_repos(const HostRecord& host, http::Fetcher& fetcher, const CrawlLimits& limits,
                          Timestamp now = now_utc());

/// Crawl state persisted as JSON-lines: repos.jsonl and host_status.jsonl.
/// A host counts as crawled once its status line is written; the latest
/// status line for a host wins.
class CrawlStore {
 public:
  explicit CrawlStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  bool has_status(const HostKey& host) const;
  std::optional<HostCrawlStatus> status(const HostKey& host) const;
  void record(const HostCrawl& crawl);

  /// Repositories of each host's most recent crawl, in discovery order.
  std::vector<RepoRef> repos() const;
  std::map<HostKey, HostCrawlStatus> statuses() const;

 private:
  void load();

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<HostKey, HostCrawlStatus> statuses_;
  std::map<HostKey, std::string> crawl_tokens_;  // token of the latest completed crawl per host
  std::map<std::string, std::vector<RepoRef>> repos_by_token_;
  std::uint64_t counter_ = 0;
  std::unique_ptr<jsonl::Appender> repo_log_;
  std::unique_ptr<jsonl::Appender> status_log_;
};

struct CrawlSummary {
  std::map<CrawlStatusKind, std::size_t> counts;
  std::size_t hosts_crawled = 0;
  std::size_t hosts_skipped = 0;          // already had a persisted status
  std::size_t hosts_not_fingerprinted = 0;  // kind Unknown, never crawled
  std::size_t repos_found = 0;
};

/// enumerate_repos over all hosts, concurrent across hosts and serial within
/// one. Hosts with a persisted status are skipped unless `force`.
CrawlSummary crawl_corpus(std::span<const HostRecord> hosts, http::Fetcher& fetcher, const CrawlLimits& limits,
                          CrawlStore& store, bool force = false);

}  // namespace forgescope
