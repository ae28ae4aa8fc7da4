#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forgescope/time.hpp"

namespace forgescope {

/// Metadata of one commit reachable from the main branch head.
struct CommitMeta {
  std::string hash;          // 40 hex chars
  std::string author_email;  // lowercased
  Timestamp author_time{};
  std::size_t message_length = 0;  // code points of the leniently decoded message
  std::vector<std::string> parent_hashes;
  std::vector<std::string> changed_paths;
  std::optional<std::string> extraction_failure;

  bool operator==(const CommitMeta&) const = default;
};

/// Facts about a repository's current state.
struct RepoSnapshot {
  std::string repo_id;
  std::string main_branch;
  std::vector<std::string> head_paths;  // blobs only
  std::size_t remote_branch_count = 0;
  std::string first_commit_hash;
  std::string last_commit_hash;
  std::size_t commit_count = 0;

  bool operator==(const RepoSnapshot&) const = default;
};

inline void to_json(nlohmann::json& j, const CommitMeta& c) {
  j = nlohmann::json{{"hash", c.hash},
                     {"author_email", c.author_email},
                     {"author_time", format_iso8601(c.author_time)},
                     {"message_length", c.message_length},
                     {"parent_hashes", c.parent_hashes},
                     {"changed_paths", c.changed_paths}};
  if (c.extraction_failure) j["extraction_failure"] = *c.extraction_failure;
}

inline void from_json(const nlohmann::json& j, CommitMeta& c) {
  c.hash = j.at("hash").get<std::string>();
  c.author_email = j.at("author_email").get<std::string>();
  c.author_time = parse_iso8601_or_throw(j.at("author_time").get<std::string>());
  c.message_length = j.at("message_length").get<std::size_t>();
  c.parent_hashes = j.at("parent_hashes").get<std::vector<std::string>>();
  c.changed_paths = j.at("changed_paths").get<std::vector<std::string>>();
  c.extraction_failure.reset();
  if (j.contains("extraction_failure")) c.extraction_failure = j["extraction_failure"].get<std::string>();
}

inline void to_json(nlohmann::json& j, const RepoSnapshot& s) {
  j = nlohmann::json{{"repo_id", s.repo_id},
                     {"main_branch", s.main_branch},
                     {"head_paths", s.head_paths},
                     {"remote_branch_count", s.remote_branch_count},
                     {"first_commit_hash", s.first_commit_hash},
                     {"last_commit_hash", s.last_commit_hash},
                     {"commit_count", s.commit_count}};
}

inline void from_json(const nlohmann::json& j, RepoSnapshot& s) {
  s.repo_id = j.at("repo_id").get<std::string>();
  s.main_branch = j.at("main_branch").get<std::string>();
  s.head_paths = j.at("head_paths").get<std::vector<std::string>>();
  s.remote_branch_count = j.at("remote_branch_count").get<std::size_t>();
  s.first_commit_hash = j.at("first_commit_hash").get<std::string>();
  s.last_commit_hash = j.at("last_commit_hash").get<std::string>();
  s.commit_count = j.at("commit_count").get<std::size_t>();
}

}  // namespace forgescope
