#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "fixture_server.hpp"
#include "git_fixture.hpp"

#ifndef FORGESCOPE_TEST_DATA
#error "FORGESCOPE_TEST_DATA must point at tests/data"
#endif

namespace fixture {

/// A self-hosted forge on localhost: a Gitea front page, the repository
/// search API listing three repositories (alpha, its mirror, and an empty
/// one), the bare repositories over dumb HTTP, and a handful of "public
/// platform" repositories under /gh for the comparison corpus. GitHub commit
/// search and Software Heritage are stubbed to know no hashes.
///
/// write_inputs() lays out config.json and its data files in `inputs`.
class Forge {
 public:
  static constexpr std::int64_t kT0 = 1614556800;  // 2021-03-01T00:00:00Z

  Forge() {
    const auto www = dir / "www";
    {
      Repo alpha(dir / "src" / "alpha");
      const Author alice{"Alice", "alice@uni-example.de"}, dave{"Dave", "dave@uni-example.de"},
          bob{"Bob", "bob@corp.com"}, anon{"You", "you@example.com"};
      alpha.write("app.py", "import sys\n\n\ndef main():\n    print(sys.argv)\n");
      alpha.write("README.md", "# alpha\n");
      alpha.commit(alice, kT0, "Initial import");
      alpha.write("app.py", "import sys\n\n\ndef main():\n    print(sys.argv[1:])\n");
      alpha.commit(dave, kT0 + 3 * 3600, "Parse args");
      alpha.write("test_app.py", "from app import main\n\n\ndef test_main():\n    main()\n");
      alpha.commit(bob, kT0 + 26 * 3600, "Add tests");
      alpha.write("app.py", "import sys\n\n\ndef main():\n    print(sys.argv[1:])\n    return 0\n");
      alpha.commit(anon, kT0 + 50 * 3600, "wip");
      alpha.write("README.md", "# alpha\n\nUsage: python app.py ARGS\n");
      alpha.commit(alice, kT0 + 74 * 3600, "Release 1.0");
      alpha.publish_bare(www / "alice" / "alpha.git");
      alpha.publish_bare(www / "mirrors" / "alpha-mirror.git");
    }
    git(dir.path(), {"init", "-q", "--bare", (www / "carol" / "empty.git").string()});
    git(www / "carol" / "empty.git", {"update-server-info"});

    // Comparison candidates, all created in March 2021 except the last.
    gh_repo("ann", "widget", {{"ann", "ann@gmail.com"}}, "index.js", "module.exports = 1;\n", 3, kT0 + 86400);
    gh_repo("ben", "tool", {{"ben", "ben@ben.dev"}, {"kim", "kim@mit.edu"}}, "tool.c", "int main(void) { return 0; }\n",
            4, kT0 + 2 * 86400);
    gh_repo("cat", "site", {{"cat", "cat@web.example.org"}}, "site.js", "console.log('hi');\n", 1, kT0 + 5 * 86400);
    gh_repo("dan", "calc", {{"dan", "dan@corp.com"}}, "calc.py", "print(1 + 1)\n", 2, kT0 + 9 * 86400);
    gh_repo("eve", "notes", {{"eve", "eve@corp.com"}, {"fay", "fay@corp.com"}}, "notes.go", "package notes\n", 5,
            kT0 + 12 * 86400);
    gh_repo("gus", "later", {{"gus", "gus@corp.com"}}, "later.rb", "puts 1\n", 2, kT0 + 40 * 86400);

    srv.server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(read_file(std::filesystem::path(FORGESCOPE_TEST_DATA) / "forge_pages" / "gitea.html"),
                      "text/html; charset=utf-8");
    });
    srv.server.Get("/api/v1/repos/search", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json data = nlohmann::json::array();
      if (req.get_param_value("page") == "1")
        for (const auto& [owner, name] : {std::pair{"alice", "alpha"}, {"mirrors", "alpha-mirror"}, {"carol", "empty"}})
          data.push_back({{"name", name},
                          {"owner", {{"login", owner}}},
                          {"clone_url", srv.origin() + "/" + owner + "/" + name + ".git"}});
      res.set_content(nlohmann::json{{"ok", true}, {"data", data}}.dump(), "application/json");
    });
    srv.server.Get("/github/search/commits", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"total_count":0,"incomplete_results":false,"items":[]})", "application/json");
    });
    srv.server.Get("/github-known/search/commits", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"total_count":1,"incomplete_results":false,"items":[{}]})", "application/json");
    });
    srv.server.Get(R"(/swh/api/1/revision/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 404;
      res.set_content(R"({"exception":"NotFoundExc"})", "application/json");
    });
    srv.server.set_mount_point("/", www.string());
    srv.start();
  }

  std::filesystem::path write_inputs(const std::filesystem::path& inputs) const {
    std::filesystem::create_directories(inputs);
    write_file(inputs / "hosts.txt", "# fixture forge\n" + srv.origin() + "\n");
    std::string events;
    for (const auto& [repo, when] : {std::pair{"ann/widget", "2021-03-02T10:00:00Z"}, {"ben/tool", "2021-03-03T09:00:00Z"},
                                     {"cat/site", "2021-03-06T12:30:00Z"}, {"dan/calc", "2021-03-10T08:00:00Z"},
                                     {"eve/notes", "2021-03-13T16:45:00Z"}, {"gus/later", "2021-04-10T00:00:00Z"}})
      events += nlohmann::json{{"repo", repo}, {"created_at", when}}.dump() + "\n";
    write_file(inputs / "events.jsonl", events);
    write_file(inputs / "domains.txt", "uni-example.de\n");
    write_file(inputs / "geo.csv", "network,country,continent\n127.0.0.0/8,DE,EU\n");
    write_file(inputs / "populations.csv", "region,population\nEU,750000000\nNA,580000000\n");
    const nlohmann::json config = {
        {"seed", 7},
        {"scan", {{"hosts_file", "hosts.txt"}}},
        {"probe", {{"concurrency", 2}, {"connect_timeout_ms", 2000}, {"read_timeout_ms", 5000}}},
        {"crawl", {{"rate_ms", 0}, {"concurrency", 2}}},
        {"clone", {{"dest", "repos"}, {"retries", 0}, {"timeout_mins", 1}, {"concurrency", 2}}},
        {"extract", {{"concurrency", 2}}},
        {"comparison", {{"events_file", "events.jsonl"}, {"clone_base_url", srv.origin() + "/gh"}, {"factor", 1.5}}},
        {"dedup",
         {{"github", {{"base_url", srv.origin() + "/github"}, {"min_interval_ms", 0}, {"token_env", "FORGESCOPE_UNSET_TOKEN"}}},
          {"software_heritage",
           {{"base_url", srv.origin() + "/swh"}, {"min_interval_ms", 0}, {"token_env", "FORGESCOPE_UNSET_TOKEN"}}}}},
        {"label", {{"domains_file", "domains.txt"}, {"geo_db", "geo.csv"}}},
        {"report", {{"population_file", "populations.csv"}}}};
    write_file(inputs / "config.json", config.dump(2) + "\n");
    return inputs / "config.json";
  }

  std::string port_text() const { return ":" + std::to_string(srv.port()); }

  TempDir dir{"forge"};
  Server srv;

 private:
  void gh_repo(const std::string& owner, const std::string& name, const std::vector<Author>& authors,
               const std::string& file, const std::string& body, int commits, std::int64_t start) {
    Repo r(dir / "src" / "gh" / owner / name);
    std::string content = body;
    for (int i = 0; i < commits; ++i) {
      r.write(file, content);
      if (i == 0) r.write("README.md", "# " + name + "\n");
      r.commit(authors[i % authors.size()], start + i * 7 * 3600, i == 0 ? "Initial commit" : "Update " + file);
      content += body;
    }
    r.publish_bare(dir / "www" / "gh" / owner / (name + ".git"));
  }
};

}  // namespace fixture
