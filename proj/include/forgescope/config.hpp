#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace forgescope {

/// Pipeline configuration: one JSON document merged over built-in defaults.
/// Relative paths are resolved against the config file's directory.
class Config {
 public:
  Config();  // defaults only
  static Config load(const std::filesystem::path& file);
  static Config from_json(const nlohmann::json& overrides, std::filesystem::path base_dir);

  static const nlohmann::json& defaults();

  const nlohmann::json& doc() const { return doc_; }
  const nlohmann::json& section(const std::string& name) const;

  std::uint64_t seed() const { return doc_.at("seed").get<std::uint64_t>(); }
  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }

  /// Overrides one value, e.g. set("crawl", "rate_ms", 250).
  void set(const std::string& section, const std::string& key, nlohmann::json value);

  /// Path-valued key of a section, resolved; nullopt when null or empty.
  std::optional<std::filesystem::path> path(const std::string& section, const std::string& key) const;

  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  nlohmann::json doc_;
  std::filesystem::path base_dir_;
};

/// Hex SHA-256 of the canonical (sorted-key, compact) JSON serialisation.
std::string config_hash(const nlohmann::json& value);

}  // namespace forgescope
