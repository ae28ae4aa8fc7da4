#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forgescope/http.hpp"
#include "forgescope/jsonl.hpp"
#include "forgescope/repo_types.hpp"
#include "forgescope/time.hpp"

namespace forgescope::dedup {

enum class OverlapClass { Novel, DuplicateComplete, Diverged };
std::string_view to_string(OverlapClass c);
OverlapClass overlap_class_from_string(std::string_view s);

/// The first/last commit-hash rule. `last_found` is absent for
/// single-commit repositories, whose first commit is also the last.
constexpr OverlapClass classify_overlap(bool first_found, std::optional<bool> last_found) {
  if (!first_found) return OverlapClass::Novel;
  if (!last_found || *last_found) return OverlapClass::DuplicateComplete;
  return OverlapClass::Diverged;
}

inline constexpr std::string_view kGitHub = "github";
inline constexpr std::string_view kSoftwareHeritage = "software-heritage";
inline constexpr std::string_view kIntraCorpus = "intra-corpus";

struct OverlapReport {
  std::string repo_id;
  std::string target;
  bool first_hash_found = false;
  std::optional<bool> last_hash_found;
  OverlapClass overlap = OverlapClass::Novel;
  Timestamp queried_at{};
  bool operator==(const OverlapReport&) const = default;
};

void to_json(nlohmann::json& j, const OverlapReport& r);
void from_json(const nlohmann::json& j, OverlapReport& r);

enum class LookupErrorKind { RateLimited, Authentication, Transport, Protocol };
std::string_view to_string(LookupErrorKind k);

struct LookupError {
  LookupErrorKind kind = LookupErrorKind::Transport;
  std::string message;
  std::optional<std::chrono::seconds> retry_after;
};

/// true = found, false = definitely not found.
using LookupResult = std::variant<bool, LookupError>;

class HashSearchClient {
 public:
  virtual ~HashSearchClient() = default;
  virtual std::string target() const = 0;
  virtual LookupResult lookup(const std::string& hash) = 0;
};

/// Serialises requests to one service with a minimum spacing.
class Pacer {
 public:
  explicit Pacer(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}
  void wait();

 private:
  std::mutex mu_;
  std::chrono::milliseconds min_interval_;
  std::optional<std::chrono::steady_clock::time_point> next_;
};

/// GitHub commit search (`/search/commits?q=hash:<sha>`).
class GitHubCommitSearch final : public HashSearchClient {
 public:
  GitHubCommitSearch(http::Fetcher& fetcher, std::string base_url, std::optional<std::string> token,
                     std::chrono::milliseconds min_interval = std::chrono::milliseconds(2000));
  /// Token from GITHUB_TOKEN when set.
  static std::optional<std::string> token_from_environment();

  std::string target() const override { return std::string(kGitHub); }
  LookupResult lookup(const std::string& hash) override;

 private:
  http::Fetcher& fetcher_;
  http::Url base_;
  std::optional<std::string> token_;
  Pacer pacer_;
};

/// Software Heritage revision lookup (`/api/1/revision/<sha>/`).
class SoftwareHeritageClient final : public HashSearchClient {
 public:
  SoftwareHeritageClient(http::Fetcher& fetcher, std::string base_url, std::optional<std::string> token,
                         std::chrono::milliseconds min_interval = std::chrono::milliseconds(1000));
  /// Token from SWH_TOKEN when set.
  static std::optional<std::string> token_from_environment();

  std::string target() const override { return std::string(kSoftwareHeritage); }
  LookupResult lookup(const std::string& hash) override;

 private:
  http::Fetcher& fetcher_;
  http::Url base_;
  std::optional<std::string> token_;
  Pacer pacer_;
};

/// Definite lookup answers keyed by (target, hash), persisted as JSON-lines.
/// Errors are never cached.
class LookupCache {
 public:
  LookupCache() = default;  // memory only
  explicit LookupCache(const std::filesystem::path& file);

  std::optional<bool> get(const std::string& target, const std::string& hash) const;
  void put(const std::string& target, const std::string& hash, bool found);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, bool> entries_;
  std::unique_ptr<jsonl::Appender> log_;
};

struct RetryPolicy {
  std::size_t max_attempts = 3;  // per hash, within one check
  std::chrono::seconds base_backoff{2};
  std::chrono::seconds max_backoff{60};
  std::chrono::seconds retry_later{900};  // suggested delay for a pending check
  std::function<void(std::chrono::seconds)> sleep;  // defaults to std::this_thread::sleep_for
};

/// A check that could not reach a conclusion; it is to be retried later and
/// carries no classification.
struct PendingCheck {
  std::string repo_id;
  std::string target;
  LookupError error;
  Timestamp retry_at{};
};

void to_json(nlohmann::json& j, const PendingCheck& p);
void from_json(const nlohmann::json& j, PendingCheck& p);

using CheckResult = std::variant<OverlapReport, PendingCheck>;

CheckResult check_remote(const RepoSnapshot& repo, HashSearchClient& client, LookupCache& cache,
                         const RetryPolicy& policy = {}, Timestamp now = now_utc());

std::vector<CheckResult> check_corpus(std::span<const RepoSnapshot> repos, HashSearchClient& client,
                                      LookupCache& cache, const RetryPolicy& policy = {},
                                      std::size_t concurrency = 4);

struct MirrorGroup {
  std::string first_hash;
  std::vector<std::string> members;   // repo ids, sorted
  std::vector<std::string> mirrors;   // share their last hash with another member
  std::vector<std::string> diverged;  // last hash unique within the group
};

struct MirrorCensus {
  std::vector<MirrorGroup> groups;  // ordered by first hash
  std::size_t repos = 0;            // snapshots examined
  std::size_t grouped = 0;          // snapshots in some group
  std::size_t mirrors = 0;
  std::size_t diverged = 0;
};

MirrorCensus intra_corpus_mirrors(std::span<const RepoSnapshot> snapshots);

struct MarginSplit {
  std::vector<std::string> eligible;  // Novel on the reference target
  std::vector<std::string> excluded;  // DuplicateComplete or Diverged
  std::vector<std::string> pending;   // no conclusive report
};

/// Splits repo ids by their report for `target` (github by default).
MarginSplit margin_filter(std::span<const RepoSnapshot> snapshots, std::span<const OverlapReport> reports,
                          std::string_view target = kGitHub);

}  // namespace forgescope::dedup
