#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "forgescope/languages.hpp"
#include "forgescope/repo_types.hpp"

namespace forgescope::git {

class GitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a repository has no branch to resolve.
class UnresolvableBranch : public GitError {
 public:
  using GitError::GitError;
};

struct MainBranch {
  std::string name;  // e.g. "develop"
  std::string ref;   // full ref, e.g. "refs/remotes/origin/develop"
};

struct TreeEntry {
  std::string path;
  std::string oid;
  std::uint64_t size = 0;
};

/// Runs git with `-C repo` and returns stdout; throws GitError on failure.
std::string run_git(const std::filesystem::path& repo, const std::vector<std::string>& args,
                    const std::optional<std::string>& input = std::nullopt);

MainBranch resolve_main_branch(const std::filesystem::path& repo);

std::vector<CommitMeta> extract_history(const std::filesystem::path& repo, const MainBranch& main);

/// Remote branch refs, not counting origin/HEAD (or any symbolic ref).
/// Falls back to local branches for repositories without remote refs.
std::size_t count_branches(const std::filesystem::path& repo);

/// Blob entries of the main head tree; symlinks and submodules excluded.
std::vector<TreeEntry> head_tree_blobs(const std::filesystem::path& repo, const MainBranch& main);

std::vector<std::string> head_file_list(const std::filesystem::path& repo, const MainBranch& main);

/// Streams blob contents in batches. Blobs above max_size are reported with
/// an empty view and skipped = true.
void for_each_blob(const std::filesystem::path& repo, const std::vector<TreeEntry>& entries,
                   const std::function<void(const TreeEntry&, std::string_view, bool skipped)>& fn,
                   std::uint64_t max_size = 16u << 20);

struct LanguageScan {
  LanguageTally tally;
  std::vector<std::string> annotations;
};

LanguageScan tally_languages(const std::filesystem::path& repo, const std::vector<TreeEntry>& entries);

struct Extraction {
  RepoSnapshot snapshot;
  std::vector<CommitMeta> commits;
  LanguageTally languages;
  std::vector<std::string> annotations;
};

/// Full per-repository extraction. Throws UnresolvableBranch for
/// repositories without branches or commits.
Extraction extract_repository(const std::string& repo_id, const std::filesystem::path& repo);

/// One JSON object per line: commits, then the snapshot, then languages.
void write_extraction(const std::filesystem::path& file, const Extraction& e);
Extraction read_extraction(const std::filesystem::path& file);

}  // namespace forgescope::git
