#include "forgescope/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"
#include "forgescope/jsonl.hpp"

namespace forgescope::comparison {

using nlohmann::json;

std::size_t ComparisonPlan::total() const {
  std::size_t n = 0;
  for (const auto& [_, t] : targets) n += t;
  return n;
}

ComparisonPlan build_comparison_plan(const MonthHistogram& histogram, double factor) {
  if (histogram.empty()) throw std::invalid_argument("comparison plan needs a non-empty histogram");
  if (!(factor >= 1.0)) throw std::invalid_argument("oversampling factor must be >= 1");
  ComparisonPlan plan;
  plan.factor = factor;
  for (const auto& [month, count] : histogram) {
    const double scaled = static_cast<double>(count) * factor;
    // Guard against products like 20 * 1.1 landing a hair above an integer.
    plan.targets[month] = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  }
  return plan;
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("empty range");
  // Reject the top partial bucket.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::vector<CreationEvent> read_events(const std::filesystem::path& file, std::vector<std::string>* skipped) {
  std::vector<CreationEvent> out;
  auto skip = [&](std::size_t line, const std::string& why) {
    if (skipped) skipped->push_back("line " + std::to_string(line) + ": " + why);
  };
  jsonl::for_each(
      file,
      [&](const json& j, std::size_t line) {
        if (!j.is_object() || !j.contains("repo") || !j.contains("created_at") || !j["repo"].is_string() ||
            !j["created_at"].is_string()) {
          skip(line, "expected {\"repo\", \"created_at\"}");
          return;
        }
        const auto name = j["repo"].get<std::string>();
        const auto slash = name.find('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 == name.size()) {
          skip(line, "repo is not owner/name");
          return;
        }
        const auto t = parse_iso8601(j["created_at"].get<std::string>());
        if (!t) {
          skip(line, "bad created_at");
          return;
        }
        out.push_back({name, format_month(*t)});
      },
      [&](std::size_t line, const std::string& err) { skip(line, err); });
  return out;
}

Ingest ingest_comparison_corpus(std::span<const CreationEvent> events, const ComparisonPlan& plan,
                                const std::string& clone_base_url, std::uint64_t seed, Timestamp now) {
  const auto base = http::Url::parse(clone_base_url);
  HostKey host{base.host, base.port, base.scheme};
  std::string prefix = clone_base_url;
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  std::map<std::string, std::set<std::string>> by_month;
  for (const auto& e : events) by_month[e.month].insert(e.full_name);

  Ingest ingest;
  SeededRng rng(seed);
  std::set<std::string> chosen;
  for (const auto& [month, target] : plan.targets) {
    std::vector<std::string> candidates;
    if (const auto it = by_month.find(month); it != by_month.end())
      for (const auto& name : it->second)
        if (!chosen.contains(name)) candidates.push_back(name);
    rng.shuffle(candidates);
    const auto take = std::min(target, candidates.size());
    ingest.sampled[month] = take;
    if (take < target) {
      ingest.shortfall[month] = target - take;
      ingest.annotations.push_back(month + ": " + std::to_string(take) + " of " + std::to_string(target) +
                                   " targeted events available");
    }
    for (std::size_t i = 0; i < take; ++i) {
      const auto& name = candidates[i];
      chosen.insert(name);
      const auto slash = name.find('/');
      RepoRef ref;
      ref.host = host;
      ref.owner = name.substr(0, slash);
      ref.name = name.substr(slash + 1);
      ref.clone_url = prefix + "/" + name + ".git";
      ref.discovered_at = now;
      ingest.refs.push_back(std::move(ref));
    }
  }
  return ingest;
}

}  // namespace forgescope::comparison
