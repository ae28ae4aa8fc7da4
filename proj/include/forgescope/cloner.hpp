#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forgescope/crawler.hpp"
#include "forgescope/http.hpp"
#include "forgescope/jsonl.hpp"

namespace forgescope {

enum class CloneKind { Success, Redirected, AuthRequired, Failed, Empty };
std::string_view to_string(CloneKind k);
CloneKind clone_kind_from_string(std::string_view s);

struct CloneOutcome {
  CloneKind kind = CloneKind::Failed;
  // Success: local path; Redirected: target; Failed: reason; otherwise empty.
  std::string detail;

  static CloneOutcome success(std::string path) { return {CloneKind::Success, std::move(path)}; }
  static CloneOutcome redirected(std::string target) { return {CloneKind::Redirected, std::move(target)}; }
  static CloneOutcome auth_required() { return {CloneKind::AuthRequired, {}}; }
  static CloneOutcome failed(std::string reason) { return {CloneKind::Failed, std::move(reason)}; }
  static CloneOutcome empty() { return {CloneKind::Empty, {}}; }

  bool terminal() const { return kind != CloneKind::Failed; }
  bool operator==(const CloneOutcome&) const = default;
};

struct CloneLimits {
  std::chrono::minutes timeout{30};
  std::size_t retries = 2;  // extra attempts after a Failed outcome
  std::size_t max_concurrent = 8;
};

/// `dest_root/<address>_<port>/<owner>/<name>.git`, each component
/// percent-encoded.
std::filesystem::path clone_path(const std::filesystem::path& dest_root, const RepoRef& ref);

/// Bare clone with branches mirrored to refs/remotes/origin/*. When
/// `preflight` is given, http(s) clone URLs are probed first so redirects
/// and authentication challenges are recognised without following them.
CloneOutcome clone_repo(const RepoRef& ref, const std::filesystem::path& dest_root, const CloneLimits& limits,
                        http::Fetcher* preflight = nullptr);

struct CloneRecord {
  std::string ref_id;
  std::size_t attempt = 0;
  CloneOutcome outcome;
};

/// Append-only outcome log (`clone_outcomes.jsonl`).
class CloneStore {
 public:
  explicit CloneStore(const std::filesystem::path& file);

  void record(const RepoRef& ref, std::size_t attempt, const CloneOutcome& outcome);
  std::optional<CloneRecord> latest(const std::string& ref_id) const;
  std::size_t attempts(const std::string& ref_id) const;
  std::map<std::string, CloneRecord> latest_all() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CloneRecord> latest_;
  jsonl::Appender out_;
};

struct CloneSummary {
  std::map<CloneKind, std::size_t> counts;  // latest outcome of every input ref
  std::size_t attempts_made = 0;            // clone attempts during this call
};

CloneSummary clone_corpus(const std::vector<RepoRef>& refs, const std::filesystem::path& dest_root,
                          const CloneLimits& limits, CloneStore& store, http::Fetcher* preflight = nullptr);

}  // namespace forgescope
