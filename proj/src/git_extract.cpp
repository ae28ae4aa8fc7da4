#include "forgescope/git_extract.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <unordered_map>

#include "forgescope/jsonl.hpp"
#include "forgescope/process.hpp"
#include "forgescope/text.hpp"

namespace forgescope::git {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kCommitMarker = "\x01\x02";

ProcessResult git_raw(const fs::path& repo, const std::vector<std::string>& args,
                      const std::optional<std::string>& input = std::nullopt) {
  std::vector<std::string> argv{"git", "-C", repo.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  ProcessOptions opts;
  opts.env = {{"LC_ALL", "C"}, {"GIT_TERMINAL_PROMPT", "0"}};
  opts.stdin_data = input;
  return run_process(argv, opts);
}

std::vector<std::string> lines_of(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : text::split(s, '\n'))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

bool ref_is_commit(const fs::path& repo, const std::string& ref) {
  return git_raw(repo, {"rev-parse", "--verify", "-q", ref + "^{commit}"}).ok();
}

struct RefEntry {
  std::string name;
  std::string symref;
};

std::vector<RefEntry> list_refs(const fs::path& repo, const std::string& prefix) {
  std::vector<RefEntry> out;
  const auto listing = run_git(repo, {"for-each-ref", "--format=%(refname)%00%(symref)", prefix});
  for (const auto& line : lines_of(listing)) {
    const auto nul = line.find('\0');
    out.push_back({line.substr(0, nul), nul == std::string::npos ? "" : line.substr(nul + 1)});
  }
  return out;
}

bool is_head_alias(const RefEntry& r) {
  return !r.symref.empty() || r.name.ends_with("/HEAD");
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

// Parses one `cat-file --batch` response stream; calls fn(oid, type, body)
// or fn(oid, "missing", {}) for every requested object.
template <typename Fn>
void parse_batch(std::string_view out, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < out.size()) {
    const auto eol = out.find('\n', pos);
    if (eol == std::string_view::npos) break;
    const auto header = out.substr(pos, eol - pos);
    pos = eol + 1;
    const auto parts = text::split(header, ' ');
    if (parts.size() == 2 && parts[1] == "missing") {
      fn(parts[0], std::string_view("missing"), std::string_view{});
      continue;
    }
    if (parts.size() < 3) throw GitError("unexpected cat-file output: " + std::string(header));
    const auto size = parse_u64(parts[2]);
    if (pos + size > out.size()) throw GitError("truncated cat-file output");
    fn(parts[0], parts[1], out.substr(pos, size));
    pos += size + 1;
  }
}

void parse_commit_body(std::string_view body, CommitMeta& meta) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto eol = body.find('\n', pos);
    if (eol == std::string_view::npos) eol = body.size();
    const auto line = body.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) break;  // end of headers
    if (line.starts_with("parent ")) {
      meta.parent_hashes.emplace_back(line.substr(7));
    } else if (line.starts_with("author ")) {
      const auto gt = line.rfind('>');
      const auto lt = line.rfind('<', gt);
      if (lt == std::string_view::npos || gt == std::string_view::npos)
        throw GitError("malformed author line");
      meta.author_email = text::to_lower(line.substr(lt + 1, gt - lt - 1));
      const auto rest = text::trim(line.substr(gt + 1));
      const auto epoch = rest.substr(0, rest.find(' '));
      long long t = 0;
      std::from_chars(epoch.data(), epoch.data() + epoch.size(), t);
      meta.author_time = from_epoch(t);
    }
  }
  const auto message = pos < body.size() ? body.substr(pos) : std::string_view{};
  meta.message_length = text::utf8_length(text::decode_lenient(message));
}

std::map<std::string, std::vector<std::string>> changed_paths_from_log(const fs::path& repo,
                                                                      const std::string& ref) {
  const auto out = run_git(repo, {"-c", "log.showRoot=true", "log", "--format=%x01%x02%H", "-z",
                                  "--name-only", "--no-renames", "--diff-merges=first-parent", ref, "--"});
  std::map<std::string, std::vector<std::string>> paths;
  std::vector<std::string>* current = nullptr;
  for (auto token : text::split(out, '\0')) {
    while (!token.empty() && token.front() == '\n') token.remove_prefix(1);
    if (token.empty()) continue;
    if (token.starts_with(kCommitMarker)) {
      current = &paths[std::string(token.substr(kCommitMarker.size()))];
      continue;
    }
    if (current != nullptr) current->emplace_back(token);
  }
  return paths;
}

std::vector<std::string> changed_paths_by_diff_tree(const fs::path& repo, const CommitMeta& c) {
  std::vector<std::string> args{"diff-tree", "-r", "-z", "--name-only", "--no-renames", "--no-commit-id"};
  if (c.parent_hashes.empty()) {
    args.push_back("--root");
    args.push_back(c.hash);
  } else {
    args.push_back(c.parent_hashes.front());
    args.push_back(c.hash);
  }
  std::vector<std::string> out;
  for (auto token : text::split(run_git(repo, args), '\0'))
    if (!token.empty()) out.emplace_back(token);
  return out;
}

}  // namespace

std::string run_git(const fs::path& repo, const std::vector<std::string>& args,
                    const std::optional<std::string>& input) {
  const auto r = git_raw(repo, args, input);
  if (!r.ok()) {
    std::string cmd = "git";
    for (const auto& a : args) cmd += " " + a;
    throw GitError(cmd + " failed (" + std::to_string(r.exit_code) + "): " + std::string(text::trim(r.err)));
  }
  return r.out;
}

MainBranch resolve_main_branch(const fs::path& repo) {
  const auto remote_refs = list_refs(repo, "refs/remotes");
  if (!remote_refs.empty()) {
    for (const auto& r : remote_refs) {
      if (r.name == "refs/remotes/origin/HEAD" && !r.symref.empty() && ref_is_commit(repo, r.symref)) {
        const std::string prefix = "refs/remotes/origin/";
        const auto name = r.symref.starts_with(prefix) ? r.symref.substr(prefix.size()) : r.symref;
        return {name, r.symref};
      }
    }
    // Branch names per remote, preferring origin.
    std::map<std::string, std::set<std::string>> by_remote;
    for (const auto& r : remote_refs) {
      if (is_head_alias(r)) continue;
      const auto rest = r.name.substr(std::string("refs/remotes/").size());
      const auto slash = rest.find('/');
      if (slash == std::string::npos) continue;
      by_remote[rest.substr(0, slash)].insert(rest.substr(slash + 1));
    }
    if (!by_remote.empty()) {
      const auto& [remote, names] = by_remote.contains("origin") ? *by_remote.find("origin") : *by_remote.begin();
      const auto full = [&](const std::string& n) { return "refs/remotes/" + remote + "/" + n; };
      for (const char* candidate : {"main", "master"})
        if (names.contains(candidate)) return {candidate, full(candidate)};
      return {*names.begin(), full(*names.begin())};
    }
  }

  const auto local = list_refs(repo, "refs/heads");
  if (local.empty()) throw UnresolvableBranch("no branches in " + repo.string());
  const auto head = git_raw(repo, {"symbolic-ref", "-q", "HEAD"});
  if (head.ok()) {
    const auto target = std::string(text::trim(head.out));
    if (target.starts_with("refs/heads/") && ref_is_commit(repo, target))
      return {target.substr(11), target};
  }
  std::set<std::string> names;
  for (const auto& r : local) names.insert(r.name.substr(11));
  for (const char* candidate : {"main", "master"})
    if (names.contains(candidate)) return {candidate, std::string("refs/heads/") + candidate};
  return {*names.begin(), "refs/heads/" + *names.begin()};
}

std::vector<CommitMeta> extract_history(const fs::path& repo, const MainBranch& main) {
  const auto hashes = lines_of(run_git(repo, {"rev-list", main.ref, "--"}));
  std::vector<CommitMeta> commits;
  commits.reserve(hashes.size());
  std::unordered_map<std::string, std::size_t> index;

  std::string request;
  for (const auto& h : hashes) request += h + "\n";
  const auto objects = run_git(repo, {"cat-file", "--batch"}, request);
  parse_batch(objects, [&](std::string_view oid, std::string_view type, std::string_view body) {
    CommitMeta meta;
    meta.hash = std::string(oid);
    if (type != "commit") {
      meta.extraction_failure = "object " + std::string(type);
    } else {
      try {
        parse_commit_body(body, meta);
      } catch (const GitError& e) {
        meta.extraction_failure = e.what();
      }
    }
    index.emplace(meta.hash, commits.size());
    commits.push_back(std::move(meta));
  });

  try {
    auto paths = changed_paths_from_log(repo, main.ref);
    for (auto& c : commits) {
      const auto it = paths.find(c.hash);
      if (it != paths.end()) c.changed_paths = std::move(it->second);
      else if (!c.extraction_failure) c.extraction_failure = "no change listing";
    }
  } catch (const GitError&) {
    for (auto& c : commits) {
      if (c.extraction_failure) continue;
      try {
        c.changed_paths = changed_paths_by_diff_tree(repo, c);
      } catch (const GitError& e) {
        c.extraction_failure = std::string("diff failed: ") + e.what();
      }
    }
  }

  std::sort(commits.begin(), commits.end(), [](const CommitMeta& a, const CommitMeta& b) {
    return std::tie(a.author_time, a.hash) < std::tie(b.author_time, b.hash);
  });
  return commits;
}

std::size_t count_branches(const fs::path& repo) {
  const auto remote = list_refs(repo, "refs/remotes");
  if (!remote.empty())
    return static_cast<std::size_t>(std::count_if(remote.begin(), remote.end(),
                                                  [](const RefEntry& r) { return !is_head_alias(r); }));
  return list_refs(repo, "refs/heads").size();
}

std::vector<TreeEntry> head_tree_blobs(const fs::path& repo, const MainBranch& main) {
  std::vector<TreeEntry> out;
  const auto listing = run_git(repo, {"ls-tree", "-r", "-l", "-z", main.ref});
  for (auto record : text::split(listing, '\0')) {
    if (record.empty()) continue;
    const auto tab = record.find('\t');
    if (tab == std::string_view::npos) continue;
    std::vector<std::string_view> fields;
    for (auto f : text::split(record.substr(0, tab), ' '))
      if (!f.empty()) fields.push_back(f);
    if (fields.size() < 4 || fields[1] != "blob" || fields[0] == "120000") continue;
    out.push_back({std::string(record.substr(tab + 1)), std::string(fields[2]), parse_u64(fields[3])});
  }
  return out;
}

std::vector<std::string> head_file_list(const fs::path& repo, const MainBranch& main) {
  std::vector<std::string> out;
  for (auto& e : head_tree_blobs(repo, main)) out.push_back(std::move(e.path));
  return out;
}

void for_each_blob(const fs::path& repo, const std::vector<TreeEntry>& entries,
                   const std::function<void(const TreeEntry&, std::string_view, bool)>& fn,
                   std::uint64_t max_size) {
  constexpr std::uint64_t kBatchBytes = 64u << 20;
  std::size_t i = 0;
  while (i < entries.size()) {
    std::vector<const TreeEntry*> batch;
    std::string request;
    std::uint64_t bytes = 0;
    for (; i < entries.size() && (batch.empty() || bytes + entries[i].size <= kBatchBytes); ++i) {
      if (entries[i].size > max_size) {
        fn(entries[i], {}, true);
        continue;
      }
      batch.push_back(&entries[i]);
      request += entries[i].oid + "\n";
      bytes += entries[i].size;
    }
    if (batch.empty()) continue;
    const auto out = run_git(repo, {"cat-file", "--batch"}, request);
    std::size_t k = 0;
    parse_batch(out, [&](std::string_view, std::string_view type, std::string_view body) {
      if (k >= batch.size()) return;
      const auto& entry = *batch[k++];
      fn(entry, body, type != "blob");
    });
    for (; k < batch.size(); ++k) fn(*batch[k], {}, true);
  }
}

LanguageScan tally_languages(const fs::path& repo, const std::vector<TreeEntry>& entries) {
  LanguageScan scan;
  std::vector<TreeEntry> known;
  for (const auto& e : entries)
    if (detect_language(e.path)) known.push_back(e);
  for_each_blob(repo, known, [&](const TreeEntry& e, std::string_view content, bool skipped) {
    if (skipped) {
      scan.annotations.push_back("blob skipped: " + e.path);
      return;
    }
    tally_file(scan.tally, e.path, content);
  });
  return scan;
}

Extraction extract_repository(const std::string& repo_id, const fs::path& repo) {
  Extraction e;
  const auto main = resolve_main_branch(repo);
  e.commits = extract_history(repo, main);
  if (e.commits.empty()) throw UnresolvableBranch("no commits on " + main.ref);

  const auto blobs = head_tree_blobs(repo, main);
  auto& s = e.snapshot;
  s.repo_id = repo_id;
  s.main_branch = main.name;
  for (const auto& b : blobs) s.head_paths.push_back(b.path);
  s.remote_branch_count = count_branches(repo);
  s.commit_count = e.commits.size();
  // commits are time-ordered, so the first root found is the earliest one
  const auto root = std::find_if(e.commits.begin(), e.commits.end(), [](const CommitMeta& c) {
    return c.parent_hashes.empty() && !c.extraction_failure;
  });
  s.first_commit_hash = (root != e.commits.end() ? *root : e.commits.front()).hash;
  s.last_commit_hash = std::string(text::trim(run_git(repo, {"rev-parse", main.ref + "^{commit}"})));

  auto scan = tally_languages(repo, blobs);
  e.languages = std::move(scan.tally);
  e.annotations = std::move(scan.annotations);
  for (const auto& c : e.commits)
    if (c.extraction_failure) e.annotations.push_back(c.hash + ": " + *c.extraction_failure);
  return e;
}

void write_extraction(const fs::path& file, const Extraction& e) {
  std::vector<json> records;
  records.reserve(e.commits.size() + 2);
  for (const auto& c : e.commits) records.push_back({{"kind", "commit"}, {"commit", c}});
  records.push_back({{"kind", "snapshot"}, {"snapshot", e.snapshot}, {"annotations", e.annotations}});
  json langs = json::object();
  for (const auto& [name, count] : e.languages) langs[name] = {{"files", count.files}, {"loc", count.loc}};
  records.push_back({{"kind", "languages"}, {"languages", langs}});
  jsonl::write_all(file, records);
}

Extraction read_extraction(const fs::path& file) {
  Extraction e;
  bool have_snapshot = false;
  jsonl::for_each(file, [&](const json& j, std::size_t) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "commit") {
      e.commits.push_back(j.at("commit").get<CommitMeta>());
    } else if (kind == "snapshot") {
      e.snapshot = j.at("snapshot").get<RepoSnapshot>();
      e.annotations = j.value("annotations", std::vector<std::string>{});
      have_snapshot = true;
    } else if (kind == "languages") {
      for (const auto& [name, v] : j.at("languages").items())
        e.languages[name] = {v.at("files").get<std::size_t>(), v.at("loc").get<std::size_t>()};
    }
  });
  if (!have_snapshot) throw InputError("no snapshot record in " + file.string());
  return e;
}

}  // namespace forgescope::git
