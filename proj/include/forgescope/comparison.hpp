#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "forgescope/crawler.hpp"

namespace forgescope::comparison {

/// "YYYY-MM" -> repositories first committed that month.
using MonthHistogram = std::map<std::string, std::size_t>;

struct ComparisonPlan {
  std::map<std::string, std::size_t> targets;  // per month, already scaled
  double factor = 1.5;
  std::size_t total() const;
};

/// targets[m] = ceil(count[m] * factor). Throws on an empty histogram or a
/// factor below 1.
ComparisonPlan build_comparison_plan(const MonthHistogram& histogram, double factor = 1.5);

/// mt19937_64 with a portable bounded draw (std distributions differ
/// between standard libraries).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct CreationEvent {
  std::string full_name;  // "owner/name"
  std::string month;      // "YYYY-MM"
};

/// Reads JSON-lines {"repo": "owner/name", "created_at": ISO-8601}.
/// Throws InputError when the file cannot be read; malformed lines are
/// reported through `skipped`.
std::vector<CreationEvent> read_events(const std::filesystem::path& file, std::vector<std::string>* skipped = nullptr);

struct Ingest {
  std::vector<RepoRef> refs;
  std::map<std::string, std::size_t> sampled;    // per month
  std::map<std::string, std::size_t> shortfall;  // months with fewer candidates than targeted
  std::vector<std::string> annotations;
};

/// Samples each month uniformly without replacement up to its target.
/// `clone_base_url` is prefixed to "owner/name.git".
Ingest ingest_comparison_corpus(std::span<const CreationEvent> events, const ComparisonPlan& plan,
                                const std::string& clone_base_url, std::uint64_t seed, Timestamp now = now_utc());

}  // namespace forgescope::comparison
