#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "forgescope/dedup.hpp"
#include "forgescope/host_label.hpp"
#include "forgescope/metrics.hpp"
#include "forgescope/stats.hpp"

namespace forgescope::report {

/// Left-aligned first column, right-aligned others, two spaces between.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

std::string fixed(double v, int decimals);

/// "<0.001" below 0.001, otherwise three decimals.
std::string format_p(double p);

// --- Corpus comparison ------------------------------------------------------

struct ComparisonMetric {
  std::string key;    // distribution file stem
  std::string label;  // table label
  std::function<std::optional<double>(const metrics::RepoMetrics&)> value;
};

/// Table rows in order: files, committers, message length, editor density,
/// burstiness, commits, branches, age, age per commit, interevent, team size.
const std::vector<ComparisonMetric>& comparison_metrics();

struct ComparisonRow {
  std::string key;
  std::string label;
  std::optional<stats::SummaryStats> reference;
  std::optional<stats::SummaryStats> comparison;
  std::optional<stats::KsResult> ks;
};

std::vector<double> metric_values(const ComparisonMetric& metric, std::span<const metrics::RepoMetrics> rows);

std::vector<ComparisonRow> compare_corpora(std::span<const metrics::RepoMetrics> reference,
                                           std::span<const metrics::RepoMetrics> comparison);

struct Labels {
  std::string reference = "self-hosted";
  std::string comparison = "github";
};

nlohmann::json comparison_json(std::span<const ComparisonRow> rows, const Labels& labels);
std::string comparison_text(std::span<const ComparisonRow> rows, const Labels& labels);

// --- Geography --------------------------------------------------------------

struct GeoRow {
  std::string region;  // continent code or "unknown"
  std::size_t hosts = 0;
  std::size_t users = 0;  // distinct emails on the region's hosts
  std::size_t repos = 0;
  std::size_t academic_users = 0;
  double host_pct = 0.0;
  double user_pct = 0.0;
  std::optional<double> per_capita;
  double academic_pct = 0.0;
};

/// Region populations, CSV lines "region,population".
std::map<std::string, double> load_populations(const std::filesystem::path& file);

/// One row per region present (ordered by descending host count, then code),
/// hosts without a location under "unknown".
std::vector<GeoRow> geographic_table(std::span<const label::HostProfile> hosts,
                                     const std::function<bool(const std::string&)>& is_academic,
                                     const std::map<std::string, double>& populations);

nlohmann::json geographic_json(std::span<const GeoRow> rows);
std::string geographic_text(std::span<const GeoRow> rows);

// --- Overlap ----------------------------------------------------------------

struct OverlapCounts {
  std::size_t checked = 0;
  std::size_t novel = 0;
  std::size_t duplicate_complete = 0;
  std::size_t diverged = 0;
  std::size_t pending = 0;
};

nlohmann::json overlap_json(const std::map<std::string, OverlapCounts>& by_target, const dedup::MirrorCensus& mirrors,
                            const dedup::MarginSplit& margin);
std::string overlap_text(const std::map<std::string, OverlapCounts>& by_target, const dedup::MirrorCensus& mirrors,
                         const dedup::MarginSplit& margin);

// --- Logistic models ----------------------------------------------------------

/// A fitted model or the reason it could not be estimated.
struct ModelResult {
  std::string name;
  std::variant<stats::LogisticFit, std::string> fit;
};

nlohmann::json fit_json(const ModelResult& m);
ModelResult fit_from_json(const nlohmann::json& j);

/// Constant, language indicators (vs. baseline), features, -2LL, pseudo-R2.
std::string logistic_text(std::span<const ModelResult> models, const std::string& baseline,
                          std::span<const std::string> language_levels);
nlohmann::json logistic_json(std::span<const ModelResult> models, const std::string& baseline,
                             std::span<const std::string> language_levels);

// --- Distributions ------------------------------------------------------------

/// Single-column CSV: header "value", one sorted value per line.
std::string distribution_csv(std::vector<double> values);

}  // namespace forgescope::report
