#include <gtest/gtest.h>

#include "forgescope/config.hpp"
#include "forgescope/errors.hpp"
#include "forgescope/store.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
namespace fx = fixture;
using nlohmann::json;

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(Config::from_json({{"crawll", json::object()}}, "/"), ConfigError);
  EXPECT_THROW(Config::from_json({{"crawl", {{"rate", 1}}}}, "/"), ConfigError);
  EXPECT_THROW(Config::from_json(json::array(), "/"), ConfigError);
}

TEST(Config, MergesOverDefaults) {
  const auto c = Config::from_json({{"crawl", {{"rate_ms", 250}}}, {"dedup", {{"github", {{"enabled", false}}}}}}, "/");
  EXPECT_EQ(c.section("crawl").at("rate_ms"), 250);
  EXPECT_EQ(c.section("crawl").at("page_size"), 50);
  EXPECT_FALSE(c.section("dedup").at("github").at("enabled").get<bool>());
  EXPECT_EQ(c.section("dedup").at("github").at("token_env"), "GITHUB_TOKEN");
}

TEST(Config, PathsResolveAgainstConfigDirectory) {
  fx::TempDir dir;
  fx::write_file(dir / "cfg.json", R"({"label": {"geo_db": "geo.csv", "domains_file": "/abs/d.txt"}})");
  const auto c = Config::load(dir / "cfg.json");
  EXPECT_EQ(*c.path("label", "geo_db"), dir / "geo.csv");
  EXPECT_EQ(*c.path("label", "domains_file"), "/abs/d.txt");
  EXPECT_FALSE(c.path("scan", "hosts_file"));
  fx::write_file(dir / "bad.json", "{");
  EXPECT_THROW(Config::load(dir / "bad.json"), ConfigError);
}

TEST(Config, HashIsCanonical) {
  const auto a = json::parse(R"({"b":1,"a":[1,2]})");
  const auto b = json::parse(R"({"a":[1,2],"b":1})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"a":[2,1],"b":1})")));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Store, SecondInstanceIsRefused) {
  fx::TempDir dir;
  {
    CorpusStore first(dir / "s");
    EXPECT_THROW(CorpusStore(dir / "s"), StoreError);
  }
  EXPECT_NO_THROW(CorpusStore(dir / "s"));
}

TEST(Store, ManifestPersists) {
  fx::TempDir dir;
  {
    CorpusStore s(dir.path());
    EXPECT_FALSE(s.record(Stage::Scan));
    s.mark_complete(Stage::Scan, "h1", {{"hosts", 3}});
    s.mark_complete(Stage::Probe, "h2", json::object());
    s.invalidate(Stage::Probe);
    s.set_seed(9);
  }
  CorpusStore s(dir.path());
  const auto r = s.record(Stage::Scan);
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->completed);
  EXPECT_EQ(r->config_hash, "h1");
  EXPECT_EQ(r->summary.at("hosts"), 3);
  EXPECT_FALSE(s.record(Stage::Probe) && s.record(Stage::Probe)->completed);
  EXPECT_EQ(s.stage_dir(Stage::Extract), dir / "extract");
}

TEST(Store, StageNames) {
  for (auto st : kStages) EXPECT_EQ(stage_from_string(to_string(st)), st);
  EXPECT_FALSE(stage_from_string("nope"));
}
