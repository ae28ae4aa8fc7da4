#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace forgescope {

enum class Stage { Scan, Probe, Crawl, Clone, Extract, Metrics, Dedup, Label, Stats, Report };

inline constexpr std::array<Stage, 10> kStages{Stage::Scan,    Stage::Probe, Stage::Crawl, Stage::Clone,
                                               Stage::Extract, Stage::Metrics, Stage::Dedup, Stage::Label,
                                               Stage::Stats,   Stage::Report};

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

struct StageRecord {
  std::string config_hash;
  bool completed = false;
  nlohmann::json summary;
};

/// On-disk corpus store: one directory per stage plus manifest.json. Only
/// one CorpusStore may hold a given root at a time (flock on `.lock`).
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path root);
  ~CorpusStore();
  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path stage_dir(Stage s) const;

  std::optional<StageRecord> record(Stage s) const;
  void mark_complete(Stage s, const std::string& config_hash, const nlohmann::json& summary);
  void invalidate(Stage s);
  void set_seed(std::uint64_t seed);
  const nlohmann::json& manifest() const { return manifest_; }

 private:
  void save() const;

  std::filesystem::path root_;
  int lock_fd_ = -1;
  nlohmann::json manifest_;
};

}  // namespace forgescope
