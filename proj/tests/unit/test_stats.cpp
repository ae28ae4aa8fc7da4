#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "forgescope/stats.hpp"

using namespace forgescope;
using namespace forgescope::stats;

namespace {

double brute_force_d(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  double d = 0;
  for (double t : points) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double x) { return x <= t; })) /
                      static_cast<double>(a.size());
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double x) { return x <= t; })) /
                      static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

metrics::RepoMetrics row(const std::string& id, double files, std::optional<std::string> lang) {
  metrics::RepoMetrics m;
  m.repo_id = id;
  m.files = static_cast<std::uint64_t>(files);
  m.committers = 1;
  m.commits = 2;
  m.branches = 1;
  m.avg_message_length = 10;
  m.avg_editors_per_file = 1.0;
  m.mean_interevent_hours = 1.0;
  m.burstiness = 0.5;
  m.age_hours = 1.0;
  m.lead_workload = 1.0;
  m.effective_team_size = 1.0;
  m.top_language_by_loc = std::move(lang);
  return m;
}

}  // namespace

TEST(Summary, Type7Quantiles) {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.p5, 1.2);
  EXPECT_DOUBLE_EQ(s.p95, 4.8);
  EXPECT_EQ(s.n, 5u);
  EXPECT_THROW(summarize(std::vector<double>{}), std::invalid_argument);
}

TEST(Ks, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n1 = std::uniform_int_distribution<int>(1, 50)(rng);
    const auto n2 = std::uniform_int_distribution<int>(1, 50)(rng);
    // Small integer support forces plenty of ties.
    std::uniform_int_distribution<int> val(0, trial % 2 ? 8 : 1000);
    std::vector<double> a(n1), b(n2);
    for (auto& x : a) x = val(rng);
    for (auto& x : b) x = val(rng) + (trial % 3);
    EXPECT_NEAR(ks_two_sample(a, b).statistic, brute_force_d(a, b), 1e-12) << "trial " << trial;
  }
}

TEST(Ks, IdenticalAndDisjoint) {
  const std::vector<double> a{1, 2, 2, 3}, b{10, 11};
  EXPECT_EQ(ks_two_sample(a, a).statistic, 0.0);
  EXPECT_DOUBLE_EQ(ks_two_sample(a, a).p_value, 1.0);
  EXPECT_EQ(ks_two_sample(a, b).statistic, 1.0);
}

TEST(Ks, AsymptoticPValueKnownPoints) {
  // Kolmogorov distribution: P(K > 1.36) ~= 0.0495, P(K > 1.0) ~= 0.2700.
  EXPECT_NEAR(kolmogorov_sf(1.36), 0.04949, 1e-4);
  EXPECT_NEAR(kolmogorov_sf(1.0), 0.26999967, 1e-6);
  EXPECT_NEAR(kolmogorov_sf(1.17999), kolmogorov_sf(1.18001), 1e-4);
}

TEST(Logistic, InterceptOnlyIsLogOdds) {
  Eigen::MatrixXd X(10, 0);
  Eigen::VectorXd y(10);
  y << 1, 1, 1, 0, 0, 0, 0, 0, 0, 0;
  const auto fit = logistic_fit(X, y, {});
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.coefficients.at(0).beta, std::log(0.3 / 0.7), 1e-8);
  EXPECT_EQ(fit.coefficients.at(0).name, "Constant");
}

TEST(Logistic, RecoversKnownCoefficients) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const int n = 5000;
  const double b0 = -0.5, b1 = 1.2, b2 = -0.7;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = z(rng);
    X(i, 1) = 10.0 * z(rng) + 100.0;  // badly scaled on purpose
    const double eta = b0 + b1 * X(i, 0) + b2 * (X(i, 1) - 100.0) / 10.0;
    y(i) = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng) ? 1 : 0;
  }
  const auto fit = logistic_fit(X, y, {"x1", "x2"});
  ASSERT_TRUE(fit.converged);
  const double true_b[] = {b0 - b2 * 10.0, b1, b2 / 10.0};
  for (int j = 0; j < 3; ++j)
    EXPECT_LT(std::abs(fit.coefficients[j].beta - true_b[j]), 4 * fit.coefficients[j].se) << j;
  for (std::size_t i = 1; i < fit.deviance_trace.size(); ++i)
    EXPECT_LE(fit.deviance_trace[i], fit.deviance_trace[i - 1] + 1e-9);
  EXPECT_GT(fit.pseudo_r2, 0.0);
  EXPECT_LT(fit.pseudo_r2, 1.0);
  EXPECT_NEAR(fit.coefficients[1].odds, std::exp(fit.coefficients[1].beta), 1e-12);
}

TEST(Logistic, SeparationIsReported) {
  Eigen::MatrixXd X(6, 1);
  X << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;
  EXPECT_THROW(logistic_fit(X, y, {"x"}), SeparationError);
  Eigen::VectorXd same = Eigen::VectorXd::Ones(6);
  EXPECT_THROW(logistic_fit(X, same, {"x"}), SeparationError);
}

TEST(Logistic, RankDeficiencyNamesColumns) {
  Eigen::MatrixXd X(8, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12, 7, 14, 8, 16;
  Eigen::VectorXd y(8);
  y << 0, 1, 0, 1, 1, 0, 1, 0;
  try {
    logistic_fit(X, y, {"a", "twice_a"});
    FAIL() << "expected RankError";
  } catch (const RankError& e) {
    EXPECT_NE(std::string(e.what()).find("twice_a"), std::string::npos);
  }
}

TEST(Design, LanguageRulesAndDeletion) {
  std::vector<LabeledMetrics> rows;
  for (int i = 0; i < 6; ++i) rows.push_back({row("r" + std::to_string(i), i + 1, "JavaScript"), "ref"});
  rows.push_back({row("b1", 3, "Bourne Shell"), "ref"});
  rows.push_back({row("b2", 4, "Bourne Again Shell"), "cmp"});
  rows.push_back({row("b3", 5, "Bourne Shell"), "cmp"});
  rows.push_back({row("rare", 2, "Fortran"), "cmp"});
  rows.push_back({row("nolang", 2, std::nullopt), "cmp"});
  auto missing = row("noint", 2, "JavaScript");
  missing.mean_interevent_hours.reset();
  rows.push_back({missing, "cmp"});
  for (int i = 0; i < 4; ++i) rows.push_back({row("c" + std::to_string(i), i + 2, "JavaScript"), "cmp"});

  DesignOptions opt;
  opt.rare_threshold = 2;
  opt.reference_corpus = "ref";
  const auto dm = build_design_matrix(rows, opt);
  EXPECT_EQ(dm.census.input_rows, rows.size());
  EXPECT_EQ(dm.census.dropped_rows, 2u);
  EXPECT_EQ(dm.census.missing_by_field.at("mean_interevent_hours"), 1u);
  EXPECT_EQ(dm.census.missing_by_field.at("top_language_by_loc"), 1u);
  EXPECT_EQ(dm.baseline, "JavaScript");
  EXPECT_EQ(dm.language_levels, (std::vector<std::string>{"Bourne (Again) Shell", "OTHER"}));
  EXPECT_EQ(dm.X.rows(), static_cast<Eigen::Index>(rows.size() - 2));
  EXPECT_EQ(dm.X.cols(), static_cast<Eigen::Index>(regression_features().size() + 2));
  EXPECT_EQ(dm.y.sum(), 7.0);

  opt.include_language = false;
  const auto dm2 = build_design_matrix(rows, opt);
  EXPECT_EQ(dm2.X.cols(), static_cast<Eigen::Index>(regression_features().size()));
  // The language field still takes part in deletion.
  EXPECT_EQ(dm2.X.rows(), dm.X.rows());
}

TEST(Design, RequiresBothCorpora) {
  std::vector<LabeledMetrics> rows{{row("a", 1, "C"), "ref"}, {row("b", 2, "C"), "ref"}};
  DesignOptions opt;
  opt.reference_corpus = "ref";
  EXPECT_THROW(build_design_matrix(rows, opt), std::invalid_argument);
}
