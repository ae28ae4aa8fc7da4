#include <random>

#include <gtest/gtest.h>

#include "fixture_server.hpp"
#include "forgescope/errors.hpp"
#include "forgescope/fingerprint.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
namespace fx = fixture;

namespace {

const std::filesystem::path kPages = std::filesystem::path(FORGESCOPE_TEST_DATA) / "forge_pages";

std::string page(const std::string& name) { return fx::read_file(kPages / name); }

class StubScan : public ScanApiClient {
 public:
  std::map<std::string, std::vector<ScanPage>> pages;
  std::optional<ScanErrorKind> fail_with;
  int calls = 0;
  ScanPage search(std::string_view marker, int p) override {
    ++calls;
    if (fail_with) throw ScanApiError(*fail_with, "stub");
    const auto& v = pages[std::string(marker)];
    return static_cast<std::size_t>(p - 1) < v.size() ? v[p - 1] : ScanPage{};
  }
};

}  // namespace

TEST(Detect, GitLabMetaMarker) {
  const auto d = detect_forge(R"(<html><meta content="GitLab" property="og:site_name"></html>)", default_rules());
  EXPECT_EQ(d.kind, ForgeKind::GitLabCE);
  EXPECT_FALSE(d.version);
}

TEST(Detect, EmptyDocumentIsUnknown) { EXPECT_EQ(detect_forge("", default_rules()), Detection{}); }

TEST(Detect, FrontPageFixtures) {
  const auto rules = default_rules();
  EXPECT_EQ(detect_forge(page("gitea.html"), rules), (Detection{ForgeKind::Gitea, "1.21.4"}));
  EXPECT_EQ(detect_forge(page("gogs.html"), rules), (Detection{ForgeKind::Gogs, "0.13.0"}));
  EXPECT_EQ(detect_forge(page("gitlab_ce.html"), rules).kind, ForgeKind::GitLabCE);
  EXPECT_EQ(detect_forge(page("blog.html"), rules).kind, ForgeKind::Unknown);
}

TEST(Detect, PrecedenceGiteaOverGogsOverGitLab) {
  const auto rules = default_rules();
  const std::string gitlab = R"(<meta content="GitLab" property="og:site_name">)";
  const std::string gogs = "Gogs is a painless self-hosted Git service";
  const std::string gitea = "Powered by Gitea";
  EXPECT_EQ(detect_forge(gitlab + gogs, rules).kind, ForgeKind::Gogs);
  EXPECT_EQ(detect_forge(gogs + gitea + gitlab, rules).kind, ForgeKind::Gitea);
}

TEST(Detect, RandomBytesWithoutMarkersAreUnknown) {
  std::mt19937_64 rng(11);
  const auto rules = default_rules();
  for (int i = 0; i < 500; ++i) {
    std::string s(std::uniform_int_distribution<int>(0, 4000)(rng), '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    const auto d = detect_forge(s, rules);
    EXPECT_EQ(d.kind, ForgeKind::Unknown);
    EXPECT_EQ(detect_forge(s, rules), d);
  }
}

TEST(Detect, InvalidUtf8AroundMarkerStillMatches) {
  const std::string html = "\xff\xfe<p>Powered by Gitea</p>\xc3";
  EXPECT_EQ(detect_forge(html, default_rules()).kind, ForgeKind::Gitea);
}

TEST(Rules, ConflictingMarkersRejected) {
  std::vector<FingerprintRule> rules{{ForgeKind::Gitea, "x"}, {ForgeKind::Gogs, "x"}};
  EXPECT_THROW(validate_rules(rules), std::invalid_argument);
  EXPECT_THROW(FingerprintRule(ForgeKind::Gitea, ""), std::invalid_argument);
}

TEST(Rules, LoadFromFile) {
  fx::TempDir dir;
  fx::write_file(dir / "rules.jsonl",
                 R"j({"kind":"Gitea","marker":"Powered by Gitea","version_pattern":"Version:\\s*([0-9.]+)"})j"
                 "\n"
                 R"({"kind":"Gogs","marker":"Gogs Version"})"
                 "\n");
  const auto rules = load_rules(dir / "rules.jsonl");
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].kind(), ForgeKind::Gitea);
  EXPECT_EQ(detect_forge("Gogs Version: 1", rules).kind, ForgeKind::Gogs);
}

TEST(HostList, DeduplicatesAndDefaults) {
  fx::TempDir dir;
  fx::write_file(dir / "hosts.txt",
                 "a.example:3000\na.example:3000\n# comment\n\nforge.example\n"
                 "not a host!\n{\"address\":\"b.example\",\"port\":8443,\"scheme\":\"https\"}\n");
  const auto in = ingest_host_list(dir / "hosts.txt");
  ASSERT_EQ(in.records.size(), 3u);
  const auto& a = in.records[0];
  EXPECT_EQ(a.key, (HostKey{"a.example", 3000, http::Scheme::Http}));
  EXPECT_EQ(a.kind, ForgeKind::Unknown);
  EXPECT_EQ(in.records[1].key, (HostKey{"forge.example", 443, http::Scheme::Https}));
  EXPECT_EQ(in.records[2].key, (HostKey{"b.example", 8443, http::Scheme::Https}));
  ASSERT_EQ(in.skipped.size(), 1u);
  EXPECT_EQ(in.skipped[0].line, 6u);
}

TEST(HostList, EmptyAndMissingFiles) {
  fx::TempDir dir;
  fx::write_file(dir / "empty.txt", "");
  EXPECT_TRUE(ingest_host_list(dir / "empty.txt").records.empty());
  EXPECT_THROW(ingest_host_list(dir / "missing.txt"), InputError);
}

TEST(HostList, ExportRoundTrip) {
  fx::TempDir dir;
  HostRecord r;
  r.key = {"x.example", 3000, http::Scheme::Http};
  r.kind = ForgeKind::Gogs;
  r.version = "0.12";
  r.observed_at = from_epoch(1600000000);
  const std::vector<HostRecord> rs{r};
  export_host_list(dir / "out.jsonl", rs);
  const auto back = ingest_host_list(dir / "out.jsonl");
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0], r);
}

TEST(ScanApi, PaginationConcatenates) {
  StubScan stub;
  const auto rules = default_rules();
  stub.pages[rules[0].marker()] = {ScanPage{{{"h1", 3000, {}}, {"h2", 3000, {}}, {"h3", 3000, {}}}, true},
                                   ScanPage{{{"h4", 3000, {}}, {"h5", 3000, {}}, {"h6", 3000, {}}}, false}};
  const auto out = query_scan_api(stub, rules);
  EXPECT_EQ(out.records.size(), 6u);
  EXPECT_FALSE(out.error);
}

TEST(ScanApi, SameHostTwoRulesMergesByPrecedence) {
  StubScan stub;
  const auto rules = default_rules();
  stub.pages[rules[1].marker()] = {ScanPage{{{"h", 443, http::Scheme::Https}}, false}};  // Gogs
  stub.pages[rules[2].marker()] = {ScanPage{{{"h", 443, http::Scheme::Https}}, false}};  // GitLab
  const auto out = query_scan_api(stub, rules);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].kind, ForgeKind::Gogs);
}

TEST(ScanApi, AuthenticationErrorSurfaces) {
  StubScan stub;
  stub.fail_with = ScanErrorKind::Authentication;
  const auto out = query_scan_api(stub, default_rules());
  EXPECT_EQ(out.error, ScanErrorKind::Authentication);
  EXPECT_FALSE(out.warnings.empty());
}

TEST(ScanApi, ShodanClientMapsHttpErrors) {
  fx::Server srv;
  srv.server.Get("/shodan/host/search", [](const httplib::Request& req, httplib::Response& res) {
    if (req.get_param_value("key") != "good") {
      res.status = 401;
      return;
    }
    if (req.get_param_value("page") == "1")
      res.set_content(R"({"total":2,"matches":[{"ip_str":"10.0.0.1","port":3000},{"ip_str":"10.0.0.2","port":443,"ssl":{}}]})",
                      "application/json");
    else
      res.set_content(R"({"total":2,"matches":[]})", "application/json");
  });
  srv.start();
  http::NetworkFetcher fetcher;
  ShodanClient bad(fetcher, http::Url::parse(srv.origin()), "bad");
  EXPECT_EQ(query_scan_api(bad, default_rules()).error, ScanErrorKind::Authentication);
  ShodanClient good(fetcher, http::Url::parse(srv.origin()), "good");
  const auto out = query_scan_api(good, default_rules());
  EXPECT_FALSE(out.error);
  ASSERT_EQ(out.records.size(), 2u);
}

TEST(Probe, FixtureServerPages) {
  fx::Server srv;
  const auto gogs = page("gogs.html");
  srv.server.Get("/", [&](const httplib::Request&, httplib::Response& res) { res.set_content(gogs, "text/html"); });
  srv.start();
  http::NetworkFetcher fetcher;
  HostRecord h;
  h.key = {"127.0.0.1", static_cast<std::uint16_t>(srv.port()), http::Scheme::Http};
  const auto out = probe_host(h, fetcher, default_rules());
  EXPECT_EQ(out.kind, ForgeKind::Gogs);
  EXPECT_EQ(out.version, "0.13.0");
}

TEST(Probe, BlogIsUnknownAndClosedPortIsUnreachable) {
  fx::Server srv;
  const auto blog = page("blog.html");
  srv.server.Get("/", [&](const httplib::Request&, httplib::Response& res) { res.set_content(blog, "text/html"); });
  srv.start();
  http::NetworkFetcher fetcher;
  HostRecord h;
  h.key = {"127.0.0.1", static_cast<std::uint16_t>(srv.port()), http::Scheme::Http};
  EXPECT_EQ(probe_host(h, fetcher, default_rules()).kind, ForgeKind::Unknown);
  const int port = srv.port();
  srv.stop();
  h.key.port = static_cast<std::uint16_t>(port);
  const auto down = probe_host(h, fetcher, default_rules());
  EXPECT_EQ(down.kind, ForgeKind::Unknown);
  ASSERT_FALSE(down.annotations.empty());
  EXPECT_EQ(down.annotations.back().rfind("unreachable", 0), 0u);
}
