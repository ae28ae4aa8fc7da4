#include "forgescope/cloner.hpp"

#include <algorithm>
#include <regex>

#include <nlohmann/json.hpp>

#include "forgescope/git_extract.hpp"
#include "forgescope/parallel.hpp"
#include "forgescope/process.hpp"
#include "forgescope/text.hpp"

namespace forgescope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CloneKind k) {
  switch (k) {
    case CloneKind::Success: return "success";
    case CloneKind::Redirected: return "redirected";
    case CloneKind::AuthRequired: return "auth_required";
    case CloneKind::Failed: return "failed";
    case CloneKind::Empty: return "empty";
  }
  return "failed";
}

CloneKind clone_kind_from_string(std::string_view s) {
  for (auto k : {CloneKind::Success, CloneKind::Redirected, CloneKind::AuthRequired, CloneKind::Failed,
                 CloneKind::Empty})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown clone outcome: " + std::string(s));
}

fs::path clone_path(const fs::path& dest_root, const RepoRef& ref) {
  return dest_root / (text::percent_encode_component(ref.host.address) + "_" + std::to_string(ref.host.port)) /
         text::percent_encode_component(ref.owner) / (text::percent_encode_component(ref.name) + ".git");
}

namespace {

bool contains_icase(std::string_view hay, std::string_view needle) {
  return text::to_lower(hay).find(text::to_lower(needle)) != std::string::npos;
}

std::optional<CloneOutcome> preflight_check(http::Fetcher& fetcher, const std::string& clone_url) {
  http::Url url;
  try {
    url = http::Url::parse(clone_url);
  } catch (const std::invalid_argument&) {
    return std::nullopt;  // not http(s): leave it to git
  }
  auto probe = url;
  auto path = probe.target.substr(0, probe.target.find('?'));
  while (path.size() > 1 && path.back() == '/') path.pop_back();
  probe.target = path + "/info/refs?service=git-upload-pack";
  const auto result = fetcher.get(probe);
  if (const auto* err = std::get_if<http::TransportError>(&result))
    return CloneOutcome::failed(std::string(http::to_string(err->kind)) + ": " + err->message);
  const auto& resp = std::get<http::Response>(result);
  if (resp.is_redirect()) {
    const auto location = resp.header("Location").value_or("");
    std::string target = location;
    try {
      target = probe.resolve(location).str();
    } catch (const std::invalid_argument&) {
    }
    return CloneOutcome::redirected(target);
  }
  if (resp.status == 401) return CloneOutcome::auth_required();
  return std::nullopt;
}

CloneOutcome classify_git_failure(const ProcessResult& r) {
  if (r.timed_out) return CloneOutcome::failed("timeout");
  const auto err = std::string(text::trim(r.err));
  if (contains_icase(err, "could not read Username") || contains_icase(err, "Authentication failed") ||
      contains_icase(err, "terminal prompts disabled"))
    return CloneOutcome::auth_required();
  if (contains_icase(err, "redirect")) return CloneOutcome::redirected("");
  // With http.followRedirects=false git reports the 3xx status as an error.
  static const std::regex status_3xx(R"(returned error: 3[0-9][0-9])");
  if (std::regex_search(err, status_3xx)) return CloneOutcome::redirected("");
  return CloneOutcome::failed(err.empty() ? "git exited with " + std::to_string(r.exit_code) : err);
}

void remove_quietly(const fs::path& p) {
  std::error_code ec;
  fs::remove_all(p, ec);
}

}  // namespace

CloneOutcome clone_repo(const RepoRef& ref, const fs::path& dest_root, const CloneLimits& limits,
                        http::Fetcher* preflight) {
  if (preflight != nullptr) {
    if (auto early = preflight_check(*preflight, ref.clone_url)) return *early;
  }
  const auto final_path = clone_path(dest_root, ref);
  const fs::path partial = final_path.string() + ".partial";
  std::error_code ec;
  fs::create_directories(final_path.parent_path(), ec);
  if (ec) return CloneOutcome::failed("cannot create " + final_path.parent_path().string() + ": " + ec.message());
  remove_quietly(partial);
  remove_quietly(final_path);

  ProcessOptions opts;
  opts.env = {{"GIT_TERMINAL_PROMPT", "0"}, {"LC_ALL", "C"}, {"GIT_ASKPASS", ""}, {"SSH_ASKPASS", ""}};
  opts.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(limits.timeout);
  ProcessResult r;
  try {
    r = run_process({"git", "-c", "http.followRedirects=false", "-c", "credential.helper=", "clone", "--bare",
                     "--quiet", "--", ref.clone_url, partial.string()},
                    opts);
  } catch (const ProcessError& e) {
    remove_quietly(partial);
    return CloneOutcome::failed(e.what());
  }
  if (!r.ok()) {
    remove_quietly(partial);
    return classify_git_failure(r);
  }

  try {
    const auto count = std::stoull(std::string(text::trim(git::run_git(partial, {"rev-list", "--all", "--count"}))));
    if (count == 0) {
      remove_quietly(partial);
      return CloneOutcome::empty();
    }
    // Keep the remote's branches visible as remote-tracking refs.
    const auto heads = git::run_git(partial, {"for-each-ref", "--format=%(objectname) %(refname)", "refs/heads"});
    std::string updates;
    for (auto line : text::split(heads, '\n')) {
      if (line.empty()) continue;
      const auto sp = line.find(' ');
      const auto name = line.substr(sp + 1 + std::string_view("refs/heads/").size());
      updates += "create refs/remotes/origin/" + std::string(name) + " " + std::string(line.substr(0, sp)) + "\n";
    }
    if (!updates.empty()) git::run_git(partial, {"update-ref", "--stdin"}, updates);
    const auto head = run_process({"git", "-C", partial.string(), "symbolic-ref", "-q", "HEAD"});
    if (head.ok()) {
      const auto target = std::string(text::trim(head.out));
      if (target.starts_with("refs/heads/")) {
        const auto remote_target = "refs/remotes/origin/" + target.substr(11);
        if (run_process({"git", "-C", partial.string(), "rev-parse", "--verify", "-q", remote_target}).ok())
          git::run_git(partial, {"symbolic-ref", "refs/remotes/origin/HEAD", remote_target});
      }
    }
    fs::rename(partial, final_path);
  } catch (const std::exception& e) {
    remove_quietly(partial);
    remove_quietly(final_path);
    return CloneOutcome::failed(e.what());
  }
  return CloneOutcome::success(final_path.string());
}

CloneStore::CloneStore(const fs::path& file) : out_(file) {
  jsonl::for_each(
      file,
      [&](const json& j, std::size_t) {
        CloneRecord rec;
        rec.ref_id = j.at("ref").get<std::string>();
        rec.attempt = j.at("attempt").get<std::size_t>();
        rec.outcome.kind = clone_kind_from_string(j.at("outcome").get<std::string>());
        rec.outcome.detail = j.value("detail", "");
        auto& slot = latest_[rec.ref_id];
        if (rec.attempt >= slot.attempt) slot = rec;
      },
      [](std::size_t, const std::string&) {});  // a torn last line is ignored
}

void CloneStore::record(const RepoRef& ref, std::size_t attempt, const CloneOutcome& outcome) {
  out_.append({{"ref", ref.id()},
               {"attempt", attempt},
               {"outcome", to_string(outcome.kind)},
               {"detail", outcome.detail},
               {"clone_url", ref.clone_url}});
  std::lock_guard lock(mu_);
  latest_[ref.id()] = {ref.id(), attempt, outcome};
}

std::optional<CloneRecord> CloneStore::latest(const std::string& ref_id) const {
  std::lock_guard lock(mu_);
  const auto it = latest_.find(ref_id);
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

std::size_t CloneStore::attempts(const std::string& ref_id) const {
  const auto rec = latest(ref_id);
  return rec ? rec->attempt : 0;
}

std::map<std::string, CloneRecord> CloneStore::latest_all() const {
  std::lock_guard lock(mu_);
  return latest_;
}

CloneSummary clone_corpus(const std::vector<RepoRef>& refs, const fs::path& dest_root, const CloneLimits& limits,
                          CloneStore& store, http::Fetcher* preflight) {
  // One queue per host: clones to the same host never overlap.
  std::map<HostKey, std::vector<const RepoRef*>> by_host;
  for (const auto& r : refs) by_host[r.host].push_back(&r);
  std::vector<std::vector<const RepoRef*>> queues;
  for (auto& [_, q] : by_host) queues.push_back(std::move(q));

  std::atomic<std::size_t> attempts_made{0};
  const std::size_t max_attempts = 1 + limits.retries;
  parallel_for(queues.size(), limits.max_concurrent, [&](std::size_t i) {
    for (const RepoRef* ref : queues[i]) {
      auto prev = store.latest(ref->id());
      std::size_t attempt = prev ? prev->attempt : 0;
      if (prev && prev->outcome.terminal()) continue;
      while (attempt < max_attempts) {
        ++attempt;
        ++attempts_made;
        const auto outcome = clone_repo(*ref, dest_root, limits, preflight);
        store.record(*ref, attempt, outcome);
        if (outcome.terminal()) break;
      }
    }
  });

  CloneSummary summary;
  summary.attempts_made = attempts_made.load();
  for (const auto& r : refs) {
    const auto rec = store.latest(r.id());
    ++summary.counts[rec ? rec->outcome.kind : CloneKind::Failed];
  }
  return summary;
}

}  // namespace forgescope
