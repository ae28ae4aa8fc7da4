#pragma once

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "forgescope/config.hpp"
#include "forgescope/host_label.hpp"
#include "forgescope/http.hpp"
#include "forgescope/store.hpp"

namespace forgescope {

/// A stage refused to run (missing upstream, configuration drift).
class StageRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outside-world dependencies, replaceable in tests. Null members are
/// created from the configuration.
struct Services {
  http::Fetcher* fetcher = nullptr;
  const label::Resolver* resolver = nullptr;
};

struct PipelineOptions {
  bool force = false;
  std::ostream* log = nullptr;  // progress lines; null for silence
};

class Pipeline {
 public:
  Pipeline(Config config, CorpusStore& store, Services services = {}, PipelineOptions options = {});
  ~Pipeline();

  /// Runs one stage. Returns its summary; {"noop": true} when the stage had
  /// already completed under the same configuration.
  nlohmann::json run_stage(Stage stage);

  /// Every stage in order.
  nlohmann::json run_all();

  /// The configuration slice a stage's hash covers.
  nlohmann::json stage_config(Stage stage) const;

 private:
  nlohmann::json scan();
  nlohmann::json probe();
  nlohmann::json crawl();
  nlohmann::json clone();
  nlohmann::json extract();
  nlohmann::json compute_metrics();
  nlohmann::json dedup();
  nlohmann::json label();
  nlohmann::json stats();
  nlohmann::json report();

  http::Fetcher& fetcher();
  void log(const std::string& line) const;

  Config config_;
  CorpusStore& store_;
  Services services_;
  PipelineOptions options_;
  std::unique_ptr<http::Fetcher> owned_fetcher_;
};

}  // namespace forgescope
