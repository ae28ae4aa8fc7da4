#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "forgescope/metrics.hpp"
#include "forgescope/text.hpp"

namespace forgescope::stats {

struct SummaryStats {
  double mean = 0.0;
  double median = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  std::size_t n = 0;
};

/// Linear interpolation between order statistics (h = (n-1)q).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  SummaryStats s;
  s.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  s.median = quantile_sorted(v, 0.5);
  s.p5 = quantile_sorted(v, 0.05);
  s.p95 = quantile_sorted(v, 0.95);
  return s;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form converges fast for small lambda.
    const double k = std::sqrt(2.0 * std::numbers::pi) / lambda;
    const double w = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double t = std::exp(-static_cast<double>((2 * j - 1) * (2 * j - 1)) * w);
      sum += t;
      if (t < 1e-17) break;
    }
    return std::clamp(1.0 - k * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double t = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? t : -t);
    if (t < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    // Step past every observation equal to the next breakpoint in either sample.
    double v;
    if (i == x.size()) v = y[j];
    else if (j == y.size()) v = x[i];
    else v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  KsResult r;
  r.statistic = d;
  r.n1 = x.size();
  r.n2 = y.size();
  r.p_value = kolmogorov_sf(std::sqrt(n1 * n2 / (n1 + n2)) * d);
  return r;
}

// ---------------------------------------------------------------------------
// Design matrix

struct LabeledMetrics {
  metrics::RepoMetrics metrics;
  std::string corpus;
};

struct Feature {
  std::string key;    // metrics CSV column
  std::string label;  // table label
};

/// Regression features in table order.
inline const std::vector<Feature>& regression_features() {
  static const std::vector<Feature> f{
      {"files", "Files"},
      {"commits", "Commits"},
      {"avg_editors_per_file", "Average editors per file"},
      {"avg_message_length", "Average message length"},
      {"burstiness", "Burstiness"},
      {"mean_interevent_hours", "Average interevent time [h]"},
      {"branches", "Branches"},
      {"lead_workload", "Lead workload"},
      {"committers", "Committers"},
      {"effective_team_size", "Effective team size"},
  };
  return f;
}

inline std::optional<double> feature_value(const metrics::RepoMetrics& m, const std::string& key) {
  if (key == "files") return static_cast<double>(m.files);
  if (key == "committers") return static_cast<double>(m.committers);
  if (key == "commits") return static_cast<double>(m.commits);
  if (key == "branches") return static_cast<double>(m.branches);
  if (key == "avg_message_length") return m.avg_message_length;
  if (key == "avg_editors_per_file") return m.avg_editors_per_file;
  if (key == "mean_interevent_hours") return m.mean_interevent_hours;
  if (key == "burstiness") return m.burstiness;
  if (key == "age_hours") return m.age_hours;
  if (key == "lead_workload") return m.lead_workload;
  if (key == "effective_team_size") return m.effective_team_size;
  throw std::invalid_argument("unknown feature " + key);
}

inline constexpr const char* kOtherLanguage = "OTHER";
inline constexpr const char* kMergedBourne = "Bourne (Again) Shell";

inline std::string merge_language(const std::string& lang) {
  if (lang == "Bourne Shell" || lang == "Bourne Again Shell") return kMergedBourne;
  return lang;
}

struct DesignOptions {
  bool include_language = true;
  std::size_t rare_threshold = 1000;  // languages in fewer repositories become OTHER
  std::string reference_corpus;       // outcome 1
  std::string baseline = "JavaScript";
};

struct DeletionCensus {
  std::size_t input_rows = 0;
  std::size_t dropped_rows = 0;
  std::map<std::string, std::size_t> missing_by_field;  // a row may count under several fields
  std::map<std::string, std::size_t> rows_by_corpus;    // surviving rows
};

struct DesignMatrix {
  std::vector<std::string> columns;  // feature labels then language indicators; no intercept
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> repo_ids;
  std::vector<std::string> languages;       // grouped label per row (when include_language)
  std::vector<std::string> language_levels;  // indicator order
  std::string baseline;
  DeletionCensus census;
};

/// Listwise deletion always covers the language field so that models with
/// and without language indicators are fitted on the same rows.
inline DesignMatrix build_design_matrix(std::span<const LabeledMetrics> rows, const DesignOptions& opt) {
  const auto& features = regression_features();
  DesignMatrix dm;
  dm.census.input_rows = rows.size();

  std::vector<const LabeledMetrics*> kept;
  std::map<std::string, std::size_t> corpora;
  for (const auto& r : rows) corpora.emplace(r.corpus, 0);
  for (const auto& r : rows) {
    bool missing = false;
    for (const auto& f : features) {
      const auto v = feature_value(r.metrics, f.key);
      if (!v || !std::isfinite(*v)) {
        ++dm.census.missing_by_field[f.key];
        missing = true;
      }
    }
    if (!r.metrics.top_language_by_loc) {
      ++dm.census.missing_by_field["top_language_by_loc"];
      missing = true;
    }
    if (missing) {
      ++dm.census.dropped_rows;
      continue;
    }
    kept.push_back(&r);
    ++corpora[r.corpus];
  }
  dm.census.rows_by_corpus = corpora;
  for (const auto& [corpus, n] : corpora)
    if (n == 0) throw std::invalid_argument("corpus '" + corpus + "' has no rows after listwise deletion");
  if (!corpora.contains(opt.reference_corpus))
    throw std::invalid_argument("reference corpus '" + opt.reference_corpus + "' not present");
  if (corpora.size() != 2) throw std::invalid_argument("expected exactly two corpora");

  for (const auto& f : features) dm.columns.push_back(f.label);
  if (opt.include_language) {
    std::map<std::string, std::size_t> freq;
    for (const auto* r : kept) ++freq[merge_language(*r->metrics.top_language_by_loc)];
    for (const auto* r : kept) {
      const auto lang = merge_language(*r->metrics.top_language_by_loc);
      dm.languages.push_back(freq[lang] < opt.rare_threshold ? kOtherLanguage : lang);
    }
    std::map<std::string, std::size_t> grouped;
    for (const auto& l : dm.languages) ++grouped[l];
    dm.baseline = opt.baseline;
    if (!grouped.contains(dm.baseline)) {
      // Most frequent label, lexicographic on ties.
      std::size_t best = 0;
      for (const auto& [l, n] : grouped)
        if (n > best) {
          best = n;
          dm.baseline = l;
        }
    }
    for (const auto& [l, _] : grouped)
      if (l != dm.baseline) dm.language_levels.push_back(l);
    std::sort(dm.language_levels.begin(), dm.language_levels.end(),
              [](const std::string& a, const std::string& b) {
                const auto la = text::to_lower(a);
                const auto lb = text::to_lower(b);
                return la != lb ? la < lb : a < b;
              });
    for (const auto& l : dm.language_levels) dm.columns.push_back(l);
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  dm.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(dm.columns.size()));
  dm.y = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *kept[static_cast<std::size_t>(i)];
    dm.repo_ids.push_back(r.metrics.repo_id);
    dm.y(i) = r.corpus == opt.reference_corpus ? 1.0 : 0.0;
    Eigen::Index c = 0;
    for (const auto& f : features) dm.X(i, c++) = *feature_value(r.metrics, f.key);
    if (opt.include_language) {
      const auto& lang = dm.languages[static_cast<std::size_t>(i)];
      for (const auto& l : dm.language_levels) dm.X(i, c++) = (l == lang) ? 1.0 : 0.0;
    }
  }
  return dm;
}

// ---------------------------------------------------------------------------
// Logistic regression

class SeparationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankError : public std::runtime_error {
 public:
  RankError(const std::string& what, std::vector<std::string> columns)
      : std::runtime_error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct Coefficient {
  std::string name;
  double beta = 0.0;
  double se = 0.0;
  double odds = 1.0;
  double p_value = 1.0;
  double ci_low = 0.0;  // on the odds scale
  double ci_high = 0.0;
};

struct LogisticFit {
  std::vector<Coefficient> coefficients;  // "Constant" first
  double deviance = 0.0;                  // -2LL
  double null_deviance = 0.0;
  double pseudo_r2 = 0.0;  // McFadden
  int iterations = 0;
  bool converged = false;
  double decrement = 0.0;  // Newton decrement at the solution
  std::vector<double> deviance_trace;  // -2LL at the start and after every iteration
  std::size_t n = 0;
};

struct LogisticOptions {
  double tol = 1e-8;  // on the Newton decrement sqrt(g' H^-1 g)
  int max_iter = 100;
  int max_halvings = 40;
};

namespace detail {

inline double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// -2LL for linear predictor eta.
inline double deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  return -2.0 * ll;
}

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e)); });
}

}  // namespace detail

/// Newton-Raphson maximum likelihood with an intercept prepended to X.
/// Columns are rescaled internally for conditioning; estimates are reported
/// on the original scale. Step halving keeps -2LL non-increasing.
inline LogisticFit logistic_fit(const Eigen::MatrixXd& X_in, const Eigen::VectorXd& y,
                                const std::vector<std::string>& names, const LogisticOptions& opt = {}) {
  const auto n = X_in.rows();
  const auto k = X_in.cols() + 1;
  if (static_cast<Eigen::Index>(names.size()) != X_in.cols())
    throw std::invalid_argument("column name count mismatch");
  if (y.size() != n || n == 0) throw std::invalid_argument("logistic_fit: empty or mismatched data");

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(k);
  Eigen::MatrixXd X(n, k);
  X.col(0).setOnes();
  for (Eigen::Index j = 1; j < k; ++j) {
    const auto col = X_in.col(j - 1);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
    const double s = sd > 0 ? sd : (col.cwiseAbs().maxCoeff() > 0 ? col.cwiseAbs().maxCoeff() : 1.0);
    scale(j) = s;
    X.col(j) = col / s;
  }

  std::vector<std::string> all_names{"Constant"};
  all_names.insert(all_names.end(), names.begin(), names.end());
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
      std::vector<std::string> bad;
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index r = qr.rank(); r < k; ++r) bad.push_back(all_names[static_cast<std::size_t>(perm(r))]);
      std::sort(bad.begin(), bad.end());
      std::string msg = "design matrix is rank deficient; dependent columns:";
      for (const auto& b : bad) msg += " " + b;
      throw RankError(msg, bad);
    }
  }

  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) throw SeparationError("outcome has a single class");

  LogisticFit fit;
  fit.n = static_cast<std::size_t>(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = X * beta;
  double dev = detail::deviance(eta, y);
  fit.deviance_trace.push_back(dev);
  Eigen::MatrixXd H(k, k);
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Eigen::VectorXd p = detail::sigmoid(eta);
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::VectorXd g = X.transpose() * (y - p);
    H = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(g);
    fit.decrement = std::sqrt(std::max(0.0, g.dot(step)));
    if (!std::isfinite(fit.decrement)) break;
    if (fit.decrement < opt.tol) {
      fit.converged = true;
      break;
    }
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    Eigen::VectorXd next_eta = X * next;
    double next_dev = detail::deviance(next_eta, y);
    for (int h = 0; h < opt.max_halvings && !(next_dev <= dev); ++h) {
      t *= 0.5;
      next = beta + t * step;
      next_eta = X * next;
      next_dev = detail::deviance(next_eta, y);
    }
    fit.iterations = it;
    if (!(next_dev <= dev)) {
      // No descent possible at machine precision: already at the optimum.
      fit.deviance_trace.push_back(dev);
      fit.converged = fit.decrement < std::sqrt(opt.tol);
      break;
    }
    beta = next;
    eta = next_eta;
    dev = next_dev;
    fit.deviance_trace.push_back(dev);
  }

  const Eigen::VectorXd p = detail::sigmoid(eta);
  const bool boundary = ((p.array() < 1e-10) || (p.array() > 1.0 - 1e-10)).any();
  bool perfect = true;
  for (Eigen::Index i = 0; i < n && perfect; ++i) perfect = (p(i) > 0.5) == (y(i) > 0.5);
  if (perfect || (boundary && !fit.converged) || dev < 1e-8)
    throw SeparationError("perfect or quasi-complete separation: coefficients diverge");
  if (!fit.converged && fit.iterations >= opt.max_iter)
    throw SeparationError("Newton-Raphson did not converge in " + std::to_string(opt.max_iter) + " iterations");

  const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
  H = X.transpose() * w.asDiagonal() * X;
  const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(k, k));

  fit.deviance = dev;
  const double n1 = y.sum();
  const double n0 = static_cast<double>(n) - n1;
  fit.null_deviance = -2.0 * (n1 * std::log(ybar) + n0 * std::log(1.0 - ybar));
  fit.pseudo_r2 = 1.0 - fit.deviance / fit.null_deviance;
  for (Eigen::Index j = 0; j < k; ++j) {
    Coefficient c;
    c.name = all_names[static_cast<std::size_t>(j)];
    c.beta = beta(j) / scale(j);
    c.se = std::sqrt(std::max(0.0, cov(j, j))) / scale(j);
    c.odds = std::exp(c.beta);
    c.p_value = c.se > 0 ? std::erfc(std::abs(c.beta / c.se) / std::numbers::sqrt2) : 1.0;
    c.ci_low = std::exp(c.beta - 1.96 * c.se);
    c.ci_high = std::exp(c.beta + 1.96 * c.se);
    fit.coefficients.push_back(std::move(c));
  }
  return fit;
}

inline LogisticFit logistic_fit(const DesignMatrix& dm, const LogisticOptions& opt = {}) {
  return logistic_fit(dm.X, dm.y, dm.columns, opt);
}

}  // namespace forgescope::stats
