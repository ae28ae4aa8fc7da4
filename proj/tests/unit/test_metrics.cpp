#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "forgescope/metrics.hpp"

using namespace forgescope;
using namespace forgescope::metrics;

namespace {

CommitMeta commit_at(std::int64_t epoch, const std::string& email = "a@x.org", std::size_t msg = 10) {
  CommitMeta c;
  c.hash = std::to_string(epoch) + email;
  c.author_email = email;
  c.author_time = from_epoch(epoch);
  c.message_length = msg;
  return c;
}

// Entropy in nats from the raw counts, converted at the end; shares no code
// with the library's bit-based formula.
double oracle_team_size(const std::vector<std::uint64_t>& w) {
  double total = 0;
  for (auto x : w) total += static_cast<double>(x);
  double nats = 0;
  for (auto x : w) {
    const double p = static_cast<double>(x) / total;
    nats -= p * std::log(p);
  }
  return std::exp(nats);
}

WorkDistribution dist(const std::vector<std::uint64_t>& w) {
  std::map<std::string, std::uint64_t> m;
  for (std::size_t i = 0; i < w.size(); ++i) m["dev" + std::to_string(i)] = w[i];
  return WorkDistribution(m);
}

}  // namespace

TEST(TeamSize, WorkedExampleTenAndOne) { EXPECT_NEAR(effective_team_size(dist({10, 1})), 1.356, 0.001); }

TEST(TeamSize, EvenSplitIsExact) {
  EXPECT_EQ(effective_team_size(dist({5, 5})), 2.0);
  EXPECT_EQ(effective_team_size(dist({7})), 1.0);
}

TEST(TeamSize, MatchesEntropyOracleOnRandomDistributions) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<std::uint64_t> w(m);
    for (auto& x : w) x = std::uniform_int_distribution<std::uint64_t>(1, 5000)(rng);
    const auto d = dist(w);
    const double got = effective_team_size(d);
    EXPECT_NEAR(got, oracle_team_size(w), 1e-9 * std::max(1.0, got)) << "trial " << trial;
    EXPECT_GE(got, 1.0 - 1e-12);
    EXPECT_LE(got, static_cast<double>(m) + 1e-9);
  }
}

TEST(TeamSize, RejectsZeroCounts) { EXPECT_THROW(dist({3, 0}), std::invalid_argument); }

TEST(Workload, LeadAndDominance) {
  EXPECT_DOUBLE_EQ(lead_workload(dist({3, 1})), 0.75);
  EXPECT_TRUE(is_dominated(dist({3, 1})));
  EXPECT_FALSE(is_dominated(dist({2, 2})));
  EXPECT_FALSE(is_dominated(dist({2, 1, 1})));
  EXPECT_TRUE(is_dominated(dist({5})));
}

TEST(Burstiness, SingleCommitIsZero) {
  std::vector<CommitMeta> h{commit_at(1000)};
  EXPECT_EQ(burstiness(h), 0.0);
}

TEST(Burstiness, ConstantSeriesIsZero) {
  std::vector<CommitMeta> h;
  for (int d = 0; d < 20; ++d)
    for (int k = 0; k < 3; ++k) h.push_back(commit_at(d * 86400 + k * 60));
  EXPECT_EQ(burstiness(h), 0.0);
}

TEST(Burstiness, ZeroFourFixture) {
  const std::vector<std::uint64_t> counts{0, 4};
  EXPECT_EQ(dispersion_index(counts), 2.0);
}

TEST(Burstiness, PoissonIsNearOne) {
  std::mt19937_64 rng(7);
  std::poisson_distribution<std::uint64_t> pois(3.0);
  std::vector<std::uint64_t> counts(10000);
  for (auto& c : counts) c = pois(rng);
  const double d = dispersion_index(counts);
  EXPECT_GE(d, 0.95);
  EXPECT_LE(d, 1.05);
}

TEST(Burstiness, DailyCountsIncludeEmptyDays) {
  std::vector<CommitMeta> h{commit_at(0), commit_at(3 * 86400 + 5)};
  EXPECT_EQ(daily_counts(h), (std::vector<std::uint64_t>{1, 0, 0, 1}));
}

TEST(Interevent, AbsentBelowTwoCommits) {
  std::vector<CommitMeta> h{commit_at(10)};
  EXPECT_FALSE(mean_interevent(h).has_value());
  EXPECT_EQ(repo_age_hours(h), 0.0);
}

TEST(Interevent, IdentityWithAge) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto n = std::uniform_int_distribution<int>(2, 60)(rng);
    std::vector<CommitMeta> h;
    for (int i = 0; i < n; ++i) h.push_back(commit_at(std::uniform_int_distribution<std::int64_t>(0, 400'000'000)(rng)));
    const double mean = *mean_interevent(h);
    const double age = repo_age_hours(h);
    const double back = mean * static_cast<double>(n - 1);
    // Exact in real arithmetic; in binary floating point the round trip
    // through the quotient can land one ulp away.
    EXPECT_LE(std::abs(back - age), std::nextafter(age, INFINITY) - age) << "trial " << trial;
  }
}

TEST(EditorsPerFile, OnlyHeadFilesTouchedCount) {
  auto c1 = commit_at(0, "a@x.org");
  c1.changed_paths = {"a", "gone"};
  auto c2 = commit_at(10, "b@x.org");
  c2.changed_paths = {"a"};
  std::vector<CommitMeta> h{c1, c2};
  const std::vector<std::string> head{"a", "untouched"};
  EXPECT_DOUBLE_EQ(*editors_per_file(h, head), 2.0);
  const std::vector<std::string> none{"zzz"};
  EXPECT_FALSE(editors_per_file(h, none).has_value());
}

TEST(RepoMetrics, EmptyHistoryThrows) {
  RepoSnapshot s;
  EXPECT_THROW(compute_repo_metrics({}, s, {}), std::invalid_argument);
}

TEST(RepoMetrics, JsonRoundTrip) {
  RepoMetrics m;
  m.repo_id = "h/o/n";
  m.files = 3;
  m.avg_editors_per_file = 1.5;
  m.top_language_by_loc = "C";
  const nlohmann::json j = m;
  EXPECT_EQ(j.get<RepoMetrics>(), m);
}

TEST(Csv, ColumnOrderIsStable) {
  EXPECT_EQ(csv_header(),
            "repo_id,corpus,files,committers,commits,branches,avg_message_length,avg_editors_per_file,"
            "mean_interevent_hours,burstiness,age_hours,lead_workload,dominated,effective_team_size,"
            "top_language_by_loc,top_language_by_files");
  RepoMetrics m;
  m.repo_id = "h:1/http/o/n,1";
  m.files = 1;
  m.committers = 1;
  m.commits = 1;
  m.avg_message_length = 4.5;
  m.dominated = true;
  EXPECT_EQ(csv_row(m, "reference"), "\"h:1/http/o/n,1\",reference,1,1,1,0,4.5,,,0,0,0,true,1,,");
}
