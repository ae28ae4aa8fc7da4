#include "forgescope/dedup.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "forgescope/parallel.hpp"
#include "forgescope/text.hpp"

namespace forgescope::dedup {

using nlohmann::json;

std::string_view to_string(OverlapClass c) {
  switch (c) {
    case OverlapClass::Novel: return "novel";
    case OverlapClass::DuplicateComplete: return "duplicate_complete";
    case OverlapClass::Diverged: return "diverged";
  }
  return "novel";
}

OverlapClass overlap_class_from_string(std::string_view s) {
  for (auto c : {OverlapClass::Novel, OverlapClass::DuplicateComplete, OverlapClass::Diverged})
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown overlap class: " + std::string(s));
}

std::string_view to_string(LookupErrorKind k) {
  switch (k) {
    case LookupErrorKind::RateLimited: return "rate_limited";
    case LookupErrorKind::Authentication: return "authentication";
    case LookupErrorKind::Transport: return "transport";
    case LookupErrorKind::Protocol: return "protocol";
  }
  return "transport";
}

void to_json(json& j, const OverlapReport& r) {
  j = json{{"repo_id", r.repo_id},
           {"target", r.target},
           {"first_hash_found", r.first_hash_found},
           {"last_hash_found", r.last_hash_found ? json(*r.last_hash_found) : json(nullptr)},
           {"class", to_string(r.overlap)},
           {"queried_at", format_iso8601(r.queried_at)}};
}

void from_json(const json& j, OverlapReport& r) {
  r.repo_id = j.at("repo_id").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.first_hash_found = j.at("first_hash_found").get<bool>();
  r.last_hash_found.reset();
  if (j.contains("last_hash_found") && !j["last_hash_found"].is_null()) r.last_hash_found = j["last_hash_found"].get<bool>();
  r.overlap = overlap_class_from_string(j.at("class").get<std::string>());
  r.queried_at = parse_iso8601_or_throw(j.at("queried_at").get<std::string>());
}

void to_json(json& j, const PendingCheck& p) {
  j = json{{"repo_id", p.repo_id},
           {"target", p.target},
           {"error", to_string(p.error.kind)},
           {"message", p.error.message},
           {"retry_at", format_iso8601(p.retry_at)}};
}

void from_json(const json& j, PendingCheck& p) {
  p.repo_id = j.at("repo_id").get<std::string>();
  p.target = j.at("target").get<std::string>();
  const auto kind = j.at("error").get<std::string>();
  for (auto k : {LookupErrorKind::RateLimited, LookupErrorKind::Authentication, LookupErrorKind::Transport,
                 LookupErrorKind::Protocol})
    if (to_string(k) == kind) p.error.kind = k;
  p.error.message = j.value("message", "");
  p.retry_at = parse_iso8601_or_throw(j.at("retry_at").get<std::string>());
}

void Pacer::wait() {
  std::unique_lock lock(mu_);
  const auto now = std::chrono::steady_clock::now();
  const auto slot = next_ && *next_ > now ? *next_ : now;
  next_ = slot + min_interval_;
  lock.unlock();
  std::this_thread::sleep_until(slot);
}

namespace {

std::optional<std::chrono::seconds> retry_after_of(const http::Response& resp) {
  if (const auto ra = resp.header("Retry-After")) {
    try {
      return std::chrono::seconds(std::stoll(*ra));
    } catch (const std::exception&) {
    }
  }
  if (const auto reset = resp.header("X-RateLimit-Reset")) {
    try {
      const auto delta = std::stoll(*reset) - to_epoch(now_utc());
      return std::chrono::seconds(std::max<long long>(delta, 0));
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

LookupError transport_error(const http::TransportError& e) {
  return {LookupErrorKind::Transport, std::string(http::to_string(e.kind)) + ": " + e.message, std::nullopt};
}

LookupError status_error(const http::Response& resp) {
  return {LookupErrorKind::Protocol, "unexpected HTTP status " + std::to_string(resp.status), std::nullopt};
}

std::optional<std::string> env_token(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

http::Url with_target(http::Url base, const std::string& path) {
  auto prefix = base.target;
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  base.target = prefix + path;
  return base;
}

}  // namespace

GitHubCommitSearch::GitHubCommitSearch(http::Fetcher& fetcher, std::string base_url, std::optional<std::string> token,
                                       std::chrono::milliseconds min_interval)
    : fetcher_(fetcher), base_(http::Url::parse(base_url)), token_(std::move(token)), pacer_(min_interval) {}

std::optional<std::string> GitHubCommitSearch::token_from_environment() { return env_token("GITHUB_TOKEN"); }

LookupResult GitHubCommitSearch::lookup(const std::string& hash) {
  http::Headers headers{{"Accept", "application/vnd.github+json"}};
  if (token_) headers["Authorization"] = "Bearer " + *token_;
  pacer_.wait();
  const auto result = fetcher_.get(with_target(base_, "/search/commits?q=" + text::url_encode("hash:" + hash)), headers);
  if (const auto* e = std::get_if<http::TransportError>(&result)) return transport_error(*e);
  const auto& resp = std::get<http::Response>(result);
  if (resp.status == 429 || (resp.status == 403 && (resp.header("X-RateLimit-Remaining") == "0" ||
                                                    text::to_lower(resp.body).find("rate limit") != std::string::npos)))
    return LookupError{LookupErrorKind::RateLimited, "rate limited", retry_after_of(resp)};
  if (resp.status == 401 || resp.status == 403)
    return LookupError{LookupErrorKind::Authentication, "HTTP " + std::to_string(resp.status), std::nullopt};
  if (resp.status != 200) return status_error(resp);
  try {
    const auto body = json::parse(resp.body);
    return body.at("total_count").get<long long>() > 0;
  } catch (const std::exception& e) {
    return LookupError{LookupErrorKind::Protocol, std::string("bad search response: ") + e.what(), std::nullopt};
  }
}

SoftwareHeritageClient::SoftwareHeritageClient(http::Fetcher& fetcher, std::string base_url,
                                               std::optional<std::string> token, std::chrono::milliseconds min_interval)
    : fetcher_(fetcher), base_(http::Url::parse(base_url)), token_(std::move(token)), pacer_(min_interval) {}

std::optional<std::string> SoftwareHeritageClient::token_from_environment() { return env_token("SWH_TOKEN"); }

LookupResult SoftwareHeritageClient::lookup(const std::string& hash) {
  http::Headers headers{{"Accept", "application/json"}};
  if (token_) headers["Authorization"] = "Bearer " + *token_;
  pacer_.wait();
  const auto result = fetcher_.get(with_target(base_, "/api/1/revision/" + hash + "/"), headers);
  if (const auto* e = std::get_if<http::TransportError>(&result)) return transport_error(*e);
  const auto& resp = std::get<http::Response>(result);
  if (resp.status == 200) return true;
  if (resp.status == 404) return false;
  if (resp.status == 429)
    return LookupError{LookupErrorKind::RateLimited, "rate limited", retry_after_of(resp)};
  if (resp.status == 401 || resp.status == 403)
    return LookupError{LookupErrorKind::Authentication, "HTTP " + std::to_string(resp.status), std::nullopt};
  return status_error(resp);
}

LookupCache::LookupCache(const std::filesystem::path& file) {
  if (std::filesystem::exists(file)) {
    jsonl::for_each(
        file,
        [&](const json& j, std::size_t) {
          entries_[{j.at("target").get<std::string>(), j.at("hash").get<std::string>()}] = j.at("found").get<bool>();
        },
        [](std::size_t, const std::string&) {});
  }
  log_ = std::make_unique<jsonl::Appender>(file);
}

std::optional<bool> LookupCache::get(const std::string& target, const std::string& hash) const {
  std::shared_lock lock(mu_);
  const auto it = entries_.find({target, hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void LookupCache::put(const std::string& target, const std::string& hash, bool found) {
  std::unique_lock lock(mu_);
  entries_.insert_or_assign({target, hash}, found);
  if (log_) log_->append({{"target", target}, {"hash", hash}, {"found", found}});
}

std::size_t LookupCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

namespace {

LookupResult lookup_with_retry(HashSearchClient& client, LookupCache& cache, const std::string& hash,
                               const RetryPolicy& policy) {
  const auto target = client.target();
  if (const auto hit = cache.get(target, hash)) return *hit;
  LookupError last;
  auto backoff = policy.base_backoff;
  for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(policy.max_attempts, 1); ++attempt) {
    auto r = client.lookup(hash);
    if (const auto* found = std::get_if<bool>(&r)) {
      cache.put(target, hash, *found);
      return *found;
    }
    last = std::get<LookupError>(r);
    // Authentication problems will not fix themselves within one run.
    if (last.kind == LookupErrorKind::Authentication || attempt == policy.max_attempts) break;
    const auto delay = std::min(last.retry_after.value_or(backoff), policy.max_backoff);
    if (policy.sleep) policy.sleep(delay);
    else std::this_thread::sleep_for(delay);
    backoff = std::min(backoff * 2, policy.max_backoff);
  }
  return last;
}

}  // namespace

CheckResult check_remote(const RepoSnapshot& repo, HashSearchClient& client, LookupCache& cache,
                         const RetryPolicy& policy, Timestamp now) {
  auto pending = [&](const LookupError& e) {
    const auto delay = std::max(e.retry_after.value_or(policy.retry_later), std::chrono::seconds(1));
    return PendingCheck{repo.repo_id, client.target(), e, now + delay};
  };
  OverlapReport report;
  report.repo_id = repo.repo_id;
  report.target = client.target();
  report.queried_at = now;

  const auto first = lookup_with_retry(client, cache, repo.first_commit_hash, policy);
  if (const auto* e = std::get_if<LookupError>(&first)) return pending(*e);
  report.first_hash_found = std::get<bool>(first);
  if (report.first_hash_found && repo.commit_count >= 2) {
    const auto last = lookup_with_retry(client, cache, repo.last_commit_hash, policy);
    if (const auto* e = std::get_if<LookupError>(&last)) return pending(*e);
    report.last_hash_found = std::get<bool>(last);
  }
  report.overlap = classify_overlap(report.first_hash_found, report.last_hash_found);
  return report;
}

std::vector<CheckResult> check_corpus(std::span<const RepoSnapshot> repos, HashSearchClient& client,
                                      LookupCache& cache, const RetryPolicy& policy, std::size_t concurrency) {
  std::vector<CheckResult> out(repos.size());
  const auto now = now_utc();
  parallel_for(repos.size(), concurrency,
               [&](std::size_t i) { out[i] = check_remote(repos[i], client, cache, policy, now); });
  return out;
}

MirrorCensus intra_corpus_mirrors(std::span<const RepoSnapshot> snapshots) {
  std::map<std::string, std::vector<const RepoSnapshot*>> by_first;
  for (const auto& s : snapshots) by_first[s.first_commit_hash].push_back(&s);

  MirrorCensus census;
  census.repos = snapshots.size();
  for (const auto& [first, members] : by_first) {
    if (members.size() < 2) continue;
    MirrorGroup g;
    g.first_hash = first;
    std::map<std::string, std::size_t> last_counts;
    for (const auto* s : members) ++last_counts[s->last_commit_hash];
    for (const auto* s : members) {
      g.members.push_back(s->repo_id);
      (last_counts[s->last_commit_hash] >= 2 ? g.mirrors : g.diverged).push_back(s->repo_id);
    }
    std::sort(g.members.begin(), g.members.end());
    std::sort(g.mirrors.begin(), g.mirrors.end());
    std::sort(g.diverged.begin(), g.diverged.end());
    census.grouped += g.members.size();
    census.mirrors += g.mirrors.size();
    census.diverged += g.diverged.size();
    census.groups.push_back(std::move(g));
  }
  return census;
}

MarginSplit margin_filter(std::span<const RepoSnapshot> snapshots, std::span<const OverlapReport> reports,
                          std::string_view target) {
  std::map<std::string, OverlapClass> classes;
  for (const auto& r : reports)
    if (r.target == target) classes[r.repo_id] = r.overlap;
  MarginSplit split;
  for (const auto& s : snapshots) {
    const auto it = classes.find(s.repo_id);
    if (it == classes.end()) split.pending.push_back(s.repo_id);
    else if (it->second == OverlapClass::Novel) split.eligible.push_back(s.repo_id);
    else split.excluded.push_back(s.repo_id);
  }
  return split;
}

}  // namespace forgescope::dedup
