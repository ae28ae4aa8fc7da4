#include <gtest/gtest.h>

#include "fixture_server.hpp"
#include "forgescope/cloner.hpp"
#include "forgescope/git_extract.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
namespace fx = fixture;
namespace fs = std::filesystem;

namespace {

/// Serves bare repositories over git's dumb HTTP protocol, plus an
/// off-domain redirect and an authentication challenge.
class GitHost {
 public:
  GitHost() {
    fx::Repo three(dir / "three");
    three.write("a.txt", "1\n");
    three.commit(fx::kAlice, 1000, "one");
    three.write("a.txt", "2\n");
    three.commit(fx::kBob, 2000, "two");
    three.checkout("side", true);
    three.write("b.txt", "3\n");
    three.commit(fx::kBob, 3000, "three");
    three.checkout("master");
    three.publish_bare(dir / "www" / "o" / "three.git");
    fx::git(dir.path(), {"init", "-q", "--bare", (dir / "www" / "o" / "empty.git").string()});
    fx::git(dir / "www" / "o" / "empty.git", {"update-server-info"});
    srv.server.Get(R"(/o/moved\.git/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_redirect("https://elsewhere.example/o/moved.git/info/refs");
    });
    srv.server.Get(R"(/o/private\.git/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 401;
      res.set_header("WWW-Authenticate", "Basic realm=\"git\"");
    });
    srv.server.set_mount_point("/", (dir / "www").string());
    srv.start();
  }

  RepoRef ref(const std::string& name) const {
    RepoRef r;
    r.host = {"127.0.0.1", static_cast<std::uint16_t>(srv.port()), http::Scheme::Http};
    r.owner = "o";
    r.name = name;
    r.clone_url = srv.origin() + "/o/" + name + ".git";
    return r;
  }

  fx::TempDir dir{"githost"};
  fx::Server srv;
};

CloneLimits quick() {
  CloneLimits l;
  l.timeout = std::chrono::minutes(1);
  return l;
}

}  // namespace

TEST(CloneRepo, SuccessMirrorsBranchesAsRemotes) {
  GitHost host;
  fx::TempDir dest;
  http::NetworkFetcher fetcher;
  const auto out = clone_repo(host.ref("three"), dest.path(), quick(), &fetcher);
  ASSERT_EQ(out.kind, CloneKind::Success) << out.detail;
  EXPECT_EQ(fs::path(out.detail), clone_path(dest.path(), host.ref("three")));
  EXPECT_EQ(git::count_branches(out.detail), 2u);
  EXPECT_EQ(git::resolve_main_branch(out.detail).name, "master");
  EXPECT_EQ(git::extract_repository("three", out.detail).commits.size(), 2u);
}

TEST(CloneRepo, EmptyLeavesNothingOnDisk) {
  GitHost host;
  fx::TempDir dest;
  const auto out = clone_repo(host.ref("empty"), dest.path(), quick());
  EXPECT_EQ(out.kind, CloneKind::Empty);
  EXPECT_FALSE(fs::exists(clone_path(dest.path(), host.ref("empty"))));
  std::size_t leftovers = 0;
  for (const auto& e : fs::recursive_directory_iterator(dest.path()))
    if (e.is_regular_file()) ++leftovers;
  EXPECT_EQ(leftovers, 0u);
}

TEST(CloneRepo, RedirectIsNotFollowed) {
  GitHost host;
  fx::TempDir dest;
  http::NetworkFetcher fetcher;
  const auto with_preflight = clone_repo(host.ref("moved"), dest.path(), quick(), &fetcher);
  EXPECT_EQ(with_preflight.kind, CloneKind::Redirected);
  EXPECT_NE(with_preflight.detail.find("elsewhere.example"), std::string::npos);
  // git itself is told not to follow redirects either.
  const auto bare = clone_repo(host.ref("moved"), dest.path(), quick());
  EXPECT_EQ(bare.kind, CloneKind::Redirected) << bare.detail;
}

TEST(CloneRepo, AuthenticationChallenge) {
  GitHost host;
  fx::TempDir dest;
  http::NetworkFetcher fetcher;
  EXPECT_EQ(clone_repo(host.ref("private"), dest.path(), quick(), &fetcher).kind, CloneKind::AuthRequired);
  EXPECT_EQ(clone_repo(host.ref("private"), dest.path(), quick()).kind, CloneKind::AuthRequired);
}

TEST(CloneCorpus, SummaryResumeAndRetries) {
  GitHost host;
  fx::TempDir dest;
  auto dead = host.ref("three");
  dead.name = "dead";
  dead.clone_url = "http://127.0.0.1:1/o/dead.git";
  const std::vector<RepoRef> refs{host.ref("three"), host.ref("empty"), dead};
  CloneLimits l = quick();
  l.retries = 2;
  {
    CloneStore store(dest / "outcomes.jsonl");
    const auto s = clone_corpus(refs, dest / "repos", l, store);
    EXPECT_EQ(s.counts.at(CloneKind::Success), 1u);
    EXPECT_EQ(s.counts.at(CloneKind::Empty), 1u);
    EXPECT_EQ(s.counts.at(CloneKind::Failed), 1u);
    EXPECT_EQ(store.attempts(dead.id()), 3u);
    EXPECT_EQ(s.attempts_made, 5u);
  }
  {
    CloneStore store(dest / "outcomes.jsonl");
    EXPECT_EQ(store.attempts(dead.id()), 3u);
    l.retries = 0;
    const auto s = clone_corpus({host.ref("three"), host.ref("empty")}, dest / "repos", l, store);
    EXPECT_EQ(s.attempts_made, 0u);
    EXPECT_EQ(s.counts.at(CloneKind::Success), 1u);
  }
}
