#include <set>

#include <gtest/gtest.h>

#include "forgescope/comparison.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
using namespace forgescope::comparison;
namespace fx = fixture;

namespace {

std::vector<CreationEvent> events(const std::string& month, int n, const std::string& tag) {
  std::vector<CreationEvent> out;
  for (int i = 0; i < n; ++i) out.push_back({tag + "/r" + std::to_string(i), month});
  return out;
}

}  // namespace

TEST(Plan, ScalesAndRoundsUp) {
  const auto plan = build_comparison_plan({{"2020-01", 10}, {"2020-02", 20}}, 1.5);
  EXPECT_EQ(plan.targets, (std::map<std::string, std::size_t>{{"2020-01", 15}, {"2020-02", 30}}));
  EXPECT_EQ(plan.total(), 45u);
  EXPECT_EQ(build_comparison_plan({{"2021-07", 3}}, 1.5).targets.at("2021-07"), 5u);
  EXPECT_EQ(build_comparison_plan({{"2021-07", 20}}, 1.1).targets.at("2021-07"), 22u);
}

TEST(Plan, FactorOneIsIdentity) {
  const MonthHistogram h{{"2019-03", 7}, {"2019-04", 1}, {"2020-12", 40}};
  EXPECT_EQ(build_comparison_plan(h, 1.0).targets, h);
}

TEST(Plan, RejectsBadInput) {
  EXPECT_THROW(build_comparison_plan({}, 1.5), std::invalid_argument);
  EXPECT_THROW(build_comparison_plan({{"2020-01", 1}}, 0.5), std::invalid_argument);
}

TEST(Rng, BoundedDrawCoversRangeAndIsReproducible) {
  SeededRng a(7), b(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = a.below(6);
    EXPECT_EQ(x, b.below(6));
    EXPECT_LT(x, 6u);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Ingest, DeterministicUnderSeedWithShortfall) {
  auto ev = events("2020-01", 40, "a");
  const auto feb = events("2020-02", 4, "b");
  ev.insert(ev.end(), feb.begin(), feb.end());
  const auto plan = build_comparison_plan({{"2020-01", 10}, {"2020-02", 10}}, 1.5);
  const auto t = Timestamp{};
  const auto x = ingest_comparison_corpus(ev, plan, "https://github.com", 42, t);
  const auto y = ingest_comparison_corpus(ev, plan, "https://github.com", 42, t);
  ASSERT_EQ(x.refs.size(), 19u);
  EXPECT_EQ(x.sampled.at("2020-01"), 15u);
  EXPECT_EQ(x.sampled.at("2020-02"), 4u);
  EXPECT_EQ(x.shortfall, (std::map<std::string, std::size_t>{{"2020-02", 11}}));
  ASSERT_EQ(x.annotations.size(), 1u);
  for (std::size_t i = 0; i < x.refs.size(); ++i) EXPECT_EQ(x.refs[i].id(), y.refs[i].id());
  const auto z = ingest_comparison_corpus(ev, plan, "https://github.com", 43, t);
  bool differs = false;
  for (std::size_t i = 0; i < 15; ++i) differs |= x.refs[i].id() != z.refs[i].id();
  EXPECT_TRUE(differs);
  EXPECT_EQ(x.refs[0].clone_url, "https://github.com/" + x.refs[0].owner + "/" + x.refs[0].name + ".git");
}

TEST(Ingest, NoRepositoryTwice) {
  // The same repository listed under two months is only drawn once.
  std::vector<CreationEvent> ev{{"o/dup", "2020-01"}, {"o/dup", "2020-02"}, {"o/dup", "2020-01"}, {"o/x", "2020-02"}};
  const auto plan = build_comparison_plan({{"2020-01", 2}, {"2020-02", 2}}, 1.0);
  const auto in = ingest_comparison_corpus(ev, plan, "https://github.com/", 1, Timestamp{});
  std::set<std::string> ids;
  for (const auto& r : in.refs) EXPECT_TRUE(ids.insert(r.id()).second) << r.id();
  EXPECT_EQ(in.refs.size(), 2u);
}

TEST(Events, ReadsAndSkipsMalformedLines) {
  fx::TempDir dir;
  fx::write_file(dir / "ev.jsonl",
                 "{\"repo\":\"a/b\",\"created_at\":\"2020-01-31T23:59:59Z\"}\n"
                 "{\"repo\":\"nope\",\"created_at\":\"2020-01-01T00:00:00Z\"}\n"
                 "{\"repo\":\"c/d\",\"created_at\":\"yesterday\"}\n"
                 "not json\n"
                 "{\"repo\":\"e/f\",\"created_at\":\"2021-02-01T00:00:00Z\"}\n");
  std::vector<std::string> skipped;
  const auto ev = read_events(dir / "ev.jsonl", &skipped);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].month, "2020-01");
  EXPECT_EQ(ev[1].full_name, "e/f");
  EXPECT_EQ(skipped.size(), 3u);
}
