#include <gtest/gtest.h>

#include "forgescope/git_extract.hpp"
#include "forgescope/metrics.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
namespace fx = fixture;

namespace {

class OracleRepoTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fx::TempDir("oracle");
    repo_ = new fx::OracleRepo(fx::build_oracle_repo(dir_->path()));
  }
  static void TearDownTestSuite() {
    delete repo_;
    delete dir_;
  }
  static fx::TempDir* dir_;
  static fx::OracleRepo* repo_;
};

fx::TempDir* OracleRepoTest::dir_ = nullptr;
fx::OracleRepo* OracleRepoTest::repo_ = nullptr;

}  // namespace

TEST_F(OracleRepoTest, MainBranchFollowsOriginHead) {
  const auto b = git::resolve_main_branch(repo_->clone);
  EXPECT_EQ(b.name, "master");
  EXPECT_EQ(b.ref, "refs/remotes/origin/master");
}

TEST_F(OracleRepoTest, BranchCountExcludesHeadAlias) { EXPECT_EQ(git::count_branches(repo_->clone), 2u); }

TEST_F(OracleRepoTest, HistoryMatchesScript) {
  const auto x = git::extract_repository("oracle", repo_->clone);
  ASSERT_EQ(x.commits.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(x.commits[i].hash, repo_->hashes[i]);
  EXPECT_EQ(x.commits[0].author_email, "alice@uni.edu");
  EXPECT_EQ(x.commits[0].message_length, 15u);
  EXPECT_EQ(x.commits[4].parent_hashes.size(), 2u);
  EXPECT_EQ(x.commits[4].changed_paths, (std::vector<std::string>{"util.py"}));
  EXPECT_EQ(x.commits[0].changed_paths, (std::vector<std::string>{"README.md", "main.py"}));
  EXPECT_EQ(x.snapshot.first_commit_hash, repo_->hashes[0]);
  EXPECT_EQ(x.snapshot.last_commit_hash, repo_->hashes[5]);
  EXPECT_EQ(x.snapshot.head_paths, (std::vector<std::string>{"README.md", "main.py", "util.py"}));
  EXPECT_TRUE(x.annotations.empty());
}

TEST_F(OracleRepoTest, MetricsMatchHandSheet) {
  const auto x = git::extract_repository("oracle", repo_->clone);
  const auto m = metrics::compute_repo_metrics(x.commits, x.snapshot, x.languages);
  EXPECT_EQ(m.files, 3u);
  EXPECT_EQ(m.committers, 2u);
  EXPECT_EQ(m.commits, 6u);
  EXPECT_EQ(m.branches, 2u);
  EXPECT_EQ(m.avg_message_length, 56.0 / 6.0);
  EXPECT_EQ(*m.avg_editors_per_file, 5.0 / 3.0);
  EXPECT_EQ(m.age_hours, 72.0);
  EXPECT_EQ(*m.mean_interevent_hours, 14.4);
  EXPECT_EQ(metrics::daily_counts(x.commits), (std::vector<std::uint64_t>{2, 2, 1, 1}));
  EXPECT_DOUBLE_EQ(m.burstiness, 1.0 / 6.0);
  EXPECT_EQ(m.lead_workload, 4.0 / 6.0);
  EXPECT_TRUE(m.dominated);
  EXPECT_NEAR(m.effective_team_size, 1.8898815748423097, 1e-15);
  EXPECT_EQ(m.top_language_by_files, "Python");
  EXPECT_EQ(m.top_language_by_loc, "Python");
}

TEST_F(OracleRepoTest, ExtractionFileRoundTrip) {
  const auto x = git::extract_repository("oracle", repo_->clone);
  const auto file = dir_->path() / "oracle.jsonl";
  git::write_extraction(file, x);
  const auto y = git::read_extraction(file);
  EXPECT_EQ(y.snapshot, x.snapshot);
  EXPECT_EQ(y.commits, x.commits);
  EXPECT_EQ(y.languages, x.languages);
}

TEST(MainBranch, FallsBackToMainThenMasterThenFirst) {
  fx::TempDir dir("branches");
  fx::Repo r(dir / "src", "trunk");
  r.write("a.txt", "a\n");
  r.commit(fx::kAlice, 1000, "one");
  r.checkout("zeta", true);
  r.checkout("alpha", true);
  // No remotes and a detached-free local repo: HEAD names the branch.
  r.checkout("trunk");
  EXPECT_EQ(git::resolve_main_branch(r.dir()).name, "trunk");
  // Remote without origin/HEAD: lexicographically first when no main/master.
  fx::git(dir.path(), {"clone", "-q", "--bare", r.dir().string(), "mirror.git"});
  const auto clone = dir / "clone";
  fx::git(dir.path(), {"init", "-q", "clone"});
  fx::git(clone, {"fetch", "-q", (dir / "mirror.git").string(), "+refs/heads/*:refs/remotes/origin/*"});
  EXPECT_EQ(git::resolve_main_branch(clone).name, "alpha");
  EXPECT_EQ(git::count_branches(clone), 3u);
  fx::git(clone, {"update-ref", "refs/remotes/origin/master", "refs/remotes/origin/zeta"});
  EXPECT_EQ(git::resolve_main_branch(clone).name, "master");
  fx::git(clone, {"update-ref", "refs/remotes/origin/main", "refs/remotes/origin/zeta"});
  EXPECT_EQ(git::resolve_main_branch(clone).name, "main");
}

TEST(MainBranch, EmptyRepositoryIsUnresolvable) {
  fx::TempDir dir("empty");
  fx::git(dir.path(), {"init", "-q", "--bare", "e.git"});
  EXPECT_THROW(git::resolve_main_branch(dir / "e.git"), git::UnresolvableBranch);
}

TEST(Extract, RenamedAndDeletedPathsAndBinaries) {
  fx::TempDir dir("paths");
  fx::Repo r(dir / "src");
  r.write("old.js", "let a = 1;\n// note\n\nlet b = 2;\n");
  r.write("blob.bin", std::string("\0\1\2binary", 9));
  r.commit(fx::kAlice, 5000, "add");
  fx::git(r.dir(), {"mv", "old.js", "new.js"});
  r.commit(fx::kBob, 6000, "rename");
  const auto x = git::extract_repository("p", r.dir());
  ASSERT_EQ(x.commits.size(), 2u);
  // Renames are listed as a delete plus an add.
  EXPECT_EQ(x.commits[1].changed_paths, (std::vector<std::string>{"new.js", "old.js"}));
  EXPECT_EQ(x.languages.at("JavaScript").files, 1u);
  EXPECT_EQ(x.languages.at("JavaScript").loc, 2u);
  EXPECT_FALSE(x.languages.contains("Unknown"));
  EXPECT_EQ(x.snapshot.head_paths.size(), 2u);
}

TEST(Extract, UnicodeMessageLengthCountsCharacters) {
  fx::TempDir dir("utf8");
  fx::Repo r(dir / "src");
  r.write("a", "x\n");
  r.commit(fx::kAlice, 100, "caf\xc3\xa9 \xe2\x9c\x93");
  const auto x = git::extract_repository("u", r.dir());
  EXPECT_EQ(x.commits[0].message_length, 7u);  // "café ✓" + newline
}
