#include <gtest/gtest.h>

#include "forgescope/report.hpp"

using namespace forgescope;
using namespace forgescope::report;

TEST(Table, AlignsColumns) {
  const auto t = render_table({"Name", "N"}, {{"alpha", "1"}, {"b", "100"}});
  EXPECT_EQ(t,
            "Name     N\n"
            "----------\n"
            "alpha    1\n"
            "b      100\n");
}

TEST(Format, PValuesAndFixed) {
  EXPECT_EQ(format_p(0.0004), "<0.001");
  EXPECT_EQ(format_p(0.001), "0.001");
  EXPECT_EQ(format_p(0.51234), "0.512");
  EXPECT_EQ(fixed(-0.0001, 2), "0.00");
  EXPECT_EQ(fixed(2.345, 1), "2.3");
}

TEST(Geography, SingleRegionAndUnknown) {
  label::HostProfile a, b, c;
  a.host = {"a", 443, http::Scheme::Https};
  a.unique_emails = {"x@u.edu", "y@c.com"};
  a.region = "EU";
  a.repo_count = 4;
  b.host = {"b", 443, http::Scheme::Https};
  b.unique_emails = {"x@u.edu"};
  b.region = "EU";
  b.repo_count = 2;
  c.host = {"c", 443, http::Scheme::Https};
  c.unique_emails = {"z@c.com"};
  c.repo_count = 1;
  const std::vector<label::HostProfile> hosts{a, b, c};
  const auto rows = geographic_table(hosts, [](const std::string& e) { return e.ends_with(".edu"); }, {{"EU", 2.0}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].region, "EU");
  EXPECT_EQ(rows[0].hosts, 2u);
  EXPECT_EQ(rows[0].users, 2u);
  EXPECT_EQ(rows[0].repos, 6u);
  EXPECT_DOUBLE_EQ(*rows[0].per_capita, 3.0);
  EXPECT_DOUBLE_EQ(rows[0].academic_pct, 50.0);
  EXPECT_NEAR(rows[0].user_pct, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(rows[1].region, "unknown");
  EXPECT_FALSE(rows[1].per_capita);
  const auto one = geographic_table(std::span(hosts).first(2), [](const std::string&) { return false; }, {});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].host_pct, 100.0);
  EXPECT_DOUBLE_EQ(one[0].user_pct, 100.0);
}

TEST(Distribution, SortedSingleColumn) {
  EXPECT_EQ(distribution_csv({3.5, 1.0, 2.0}), "value\n1\n2\n3.5\n");
  EXPECT_EQ(distribution_csv({}), "value\n");
}

TEST(Comparison, RowsKeepOrderWhenOneSideEmpty) {
  metrics::RepoMetrics m;
  m.repo_id = "r";
  m.files = 3;
  m.committers = 1;
  m.commits = 2;
  const std::vector<metrics::RepoMetrics> ref{m, m};
  const auto rows = compare_corpora(ref, {});
  ASSERT_EQ(rows.size(), comparison_metrics().size());
  EXPECT_EQ(rows[0].key, comparison_metrics()[0].key);
  EXPECT_TRUE(rows[0].reference);
  EXPECT_FALSE(rows[0].comparison);
  EXPECT_FALSE(rows[0].ks);
  EXPECT_NE(comparison_text(rows, {}).find("n/a"), std::string::npos);
}
