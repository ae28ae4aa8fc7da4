#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "forgescope/languages.hpp"
#include "forgescope/repo_types.hpp"

namespace forgescope::metrics {

/// Commits per contributor.
class WorkDistribution {
 public:
  WorkDistribution() = default;
  explicit WorkDistribution(std::map<std::string, std::uint64_t> counts) : counts_(std::move(counts)) {
    for (const auto& [who, w] : counts_) {
      if (w == 0) throw std::invalid_argument("zero work count for " + who);
      total_ += w;
    }
  }

  static WorkDistribution from_history(std::span<const CommitMeta> history) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& c : history) ++counts[c.author_email];
    return WorkDistribution(std::move(counts));
  }

  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  std::uint64_t max_count() const {
    std::uint64_t m = 0;
    for (const auto& [_, w] : counts_) m = std::max(m, w);
    return m;
  }

  std::vector<double> fractions() const {
    std::vector<double> f;
    f.reserve(counts_.size());
    for (const auto& [_, w] : counts_) f.push_back(static_cast<double>(w) / static_cast<double>(total_));
    return f;
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

namespace detail {

// Extended precision so that 2^h rounds to the nearest double in all but
// rare double-rounding cases.
inline long double entropy_bits_ld(const WorkDistribution& d) {
  long double total = 0.0L, h = 0.0L;
  for (const auto& [_, w] : d.counts()) total += static_cast<long double>(w);
  for (const auto& [_, w] : d.counts()) {
    const long double f = static_cast<long double>(w) / total;
    h -= f * std::log2(f);
  }
  return h;
}

}  // namespace detail

/// Shannon entropy of the work fractions in bits.
inline double work_entropy_bits(const WorkDistribution& d) { return static_cast<double>(detail::entropy_bits_ld(d)); }

/// m = 2^h.
inline double effective_team_size(const WorkDistribution& d) {
  if (d.empty()) throw std::invalid_argument("empty work distribution");
  if (d.size() == 1) return 1.0;
  return static_cast<double>(std::exp2(detail::entropy_bits_ld(d)));
}

inline double lead_workload(const WorkDistribution& d) {
  if (d.empty()) throw std::invalid_argument("empty work distribution");
  return static_cast<double>(d.max_count()) / static_cast<double>(d.total());
}

/// The lead made more commits than everyone else combined.
inline bool is_dominated(const WorkDistribution& d) {
  if (d.empty()) throw std::invalid_argument("empty work distribution");
  const auto max = d.max_count();
  return max > d.total() - max;
}

inline std::int64_t epoch_of(const CommitMeta& c) { return to_epoch(c.author_time); }

inline std::pair<std::int64_t, std::int64_t> time_span(std::span<const CommitMeta> history) {
  auto [lo, hi] = std::minmax_element(history.begin(), history.end(), [](const auto& a, const auto& b) {
    return a.author_time < b.author_time;
  });
  return {epoch_of(*lo), epoch_of(*hi)};
}


/// Commits per UTC calendar day from the first commit's day to the last's,
/// zero days included.
inline std::vector<std::uint64_t> daily_counts(std::span<const CommitMeta> history) {
  if (history.empty()) return {};
  const auto day = [](std::int64_t t) {
    return t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
  };
  const auto [first, last] = time_span(history);
  const auto d0 = day(first);
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(day(last) - d0 + 1), 0);
  for (const auto& c : history) ++counts[static_cast<std::size_t>(day(epoch_of(c)) - d0)];
  return counts;
}

/// Population variance over mean.
inline double dispersion_index(std::span<const std::uint64_t> counts) {
  if (counts.empty()) return 0.0;
  const double n = static_cast<double>(counts.size());
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  const double mean = sum / n;
  if (mean == 0.0) return 0.0;
  double ss = 0.0;
  for (auto c : counts) ss += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
  return (ss / n) / mean;
}

inline double burstiness(std::span<const CommitMeta> history) {
  if (history.size() <= 1) return 0.0;
  const auto counts = daily_counts(history);
  return dispersion_index(counts);
}

inline double repo_age_hours(std::span<const CommitMeta> history) {
  if (history.empty()) return 0.0;
  const auto [first, last] = time_span(history);
  return static_cast<double>(last - first) / 3600.0;
}

/// Mean gap between successive commits in hours; absent below two commits.
/// Successive gaps telescope, so the mean is computed from the span directly.
inline std::optional<double> mean_interevent(std::span<const CommitMeta> history) {
  if (history.size() < 2) return std::nullopt;
  return repo_age_hours(history) / static_cast<double>(history.size() - 1);
}

/// Mean number of distinct authors per head file, over head files touched
/// at least once.
inline std::optional<double> editors_per_file(std::span<const CommitMeta> history,
                                              std::span<const std::string> head_paths) {
  const std::unordered_set<std::string> head(head_paths.begin(), head_paths.end());
  std::unordered_map<std::string, std::unordered_set<std::string>> editors;
  for (const auto& c : history)
    for (const auto& p : c.changed_paths)
      if (head.contains(p)) editors[p].insert(c.author_email);
  if (editors.empty()) return std::nullopt;
  std::uint64_t total = 0;
  for (const auto& [_, who] : editors) total += who.size();
  return static_cast<double>(total) / static_cast<double>(editors.size());
}

struct RepoMetrics {
  std::string repo_id;
  std::uint64_t files = 0;
  std::uint64_t committers = 0;
  std::uint64_t commits = 0;
  std::uint64_t branches = 0;
  double avg_message_length = 0.0;
  std::optional<double> avg_editors_per_file;
  std::optional<double> mean_interevent_hours;
  double burstiness = 0.0;
  double age_hours = 0.0;
  double lead_workload = 0.0;
  bool dominated = false;
  double effective_team_size = 1.0;
  std::optional<std::string> top_language_by_loc;
  std::optional<std::string> top_language_by_files;

  bool operator==(const RepoMetrics&) const = default;
};

inline RepoMetrics compute_repo_metrics(std::span<const CommitMeta> history, const RepoSnapshot& snapshot,
                                        const LanguageTally& tally) {
  if (history.empty()) throw std::invalid_argument("metrics need at least one commit: " + snapshot.repo_id);
  RepoMetrics m;
  m.repo_id = snapshot.repo_id;
  m.files = snapshot.head_paths.size();
  m.commits = history.size();
  m.branches = snapshot.remote_branch_count;
  const auto dist = WorkDistribution::from_history(history);
  m.committers = dist.size();
  std::uint64_t chars = 0;
  for (const auto& c : history) chars += c.message_length;
  m.avg_message_length = static_cast<double>(chars) / static_cast<double>(history.size());
  m.avg_editors_per_file = editors_per_file(history, snapshot.head_paths);
  m.mean_interevent_hours = mean_interevent(history);
  m.burstiness = burstiness(history);
  m.age_hours = repo_age_hours(history);
  m.lead_workload = lead_workload(dist);
  m.dominated = is_dominated(dist);
  m.effective_team_size = effective_team_size(dist);
  m.top_language_by_loc = top_language(tally, LanguageMeasure::Loc);
  m.top_language_by_files = top_language(tally, LanguageMeasure::Files);
  return m;
}

inline void to_json(nlohmann::json& j, const RepoMetrics& m) {
  auto opt = [](const auto& o) -> nlohmann::json { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"repo_id", m.repo_id},
                     {"files", m.files},
                     {"committers", m.committers},
                     {"commits", m.commits},
                     {"branches", m.branches},
                     {"avg_message_length", m.avg_message_length},
                     {"avg_editors_per_file", opt(m.avg_editors_per_file)},
                     {"mean_interevent_hours", opt(m.mean_interevent_hours)},
                     {"burstiness", m.burstiness},
                     {"age_hours", m.age_hours},
                     {"lead_workload", m.lead_workload},
                     {"dominated", m.dominated},
                     {"effective_team_size", m.effective_team_size},
                     {"top_language_by_loc", opt(m.top_language_by_loc)},
                     {"top_language_by_files", opt(m.top_language_by_files)}};
}

inline void from_json(const nlohmann::json& j, RepoMetrics& m) {
  auto opt_d = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<double>();
  };
  auto opt_s = [&](const char* k) -> std::optional<std::string> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<std::string>();
  };
  m.repo_id = j.at("repo_id").get<std::string>();
  m.files = j.at("files").get<std::uint64_t>();
  m.committers = j.at("committers").get<std::uint64_t>();
  m.commits = j.at("commits").get<std::uint64_t>();
  m.branches = j.at("branches").get<std::uint64_t>();
  m.avg_message_length = j.at("avg_message_length").get<double>();
  m.avg_editors_per_file = opt_d("avg_editors_per_file");
  m.mean_interevent_hours = opt_d("mean_interevent_hours");
  m.burstiness = j.at("burstiness").get<double>();
  m.age_hours = j.at("age_hours").get<double>();
  m.lead_workload = j.at("lead_workload").get<double>();
  m.dominated = j.at("dominated").get<bool>();
  m.effective_team_size = j.at("effective_team_size").get<double>();
  m.top_language_by_loc = opt_s("top_language_by_loc");
  m.top_language_by_files = opt_s("top_language_by_files");
}

// CSV export. Column order is fixed; missing optional values are empty cells
// and doubles use the shortest representation that round-trips.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "repo_id",        "corpus",         "files",         "committers",          "commits",
      "branches",       "avg_message_length", "avg_editors_per_file", "mean_interevent_hours",
      "burstiness",     "age_hours",      "lead_workload", "dominated",           "effective_team_size",
      "top_language_by_loc", "top_language_by_files"};
  return cols;
}

inline std::string csv_quote(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_double(double v) { return fmt::format("{}", v); }

inline std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

inline std::string csv_row(const RepoMetrics& m, std::string_view corpus) {
  auto od = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  auto os = [](const std::optional<std::string>& v) { return v ? csv_quote(*v) : std::string(); };
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", csv_quote(m.repo_id), csv_quote(corpus),
                     m.files, m.committers, m.commits, m.branches, format_double(m.avg_message_length),
                     od(m.avg_editors_per_file), od(m.mean_interevent_hours), format_double(m.burstiness),
                     format_double(m.age_hours), format_double(m.lead_workload), m.dominated ? "true" : "false",
                     format_double(m.effective_team_size), os(m.top_language_by_loc), os(m.top_language_by_files));
}

}  // namespace forgescope::metrics
