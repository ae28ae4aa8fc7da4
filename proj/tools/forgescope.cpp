#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "forgescope/config.hpp"
#include "forgescope/errors.hpp"
#include "forgescope/pipeline.hpp"
#include "forgescope/store.hpp"

using namespace forgescope;

namespace {

/// Host selection from a file (one entry per line, '#' comments) or, when no
/// such file exists, a comma-separated list.
nlohmann::json host_selection(const std::string& arg) {
  if (!std::filesystem::is_regular_file(arg)) return arg;
  std::ifstream in(arg);
  if (!in) throw ConfigError("cannot read host selection " + arg);
  nlohmann::json out = nlohmann::json::array();
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forgescope: survey self-hosted git forges"};
  app.require_subcommand(1);

  std::string store_dir;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
  app.add_option("--store", store_dir, "Corpus store directory")->required();
  app.add_option("--config", config_file, "Configuration file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for sampling");
  app.add_flag("--force", force, "Rerun stages despite configuration drift or prior completion");
  app.add_flag("-q,--quiet", quiet, "Print only the final summary");

  std::map<std::string, CLI::App*> subs;
  for (const auto s : kStages) {
    const std::string name(to_string(s));
    subs[name] = app.add_subcommand(name, "Run the " + name + " stage");
  }
  subs["run-all"] = app.add_subcommand("run-all", "Run every stage in order");

  std::optional<long> rate_ms;
  std::optional<std::size_t> crawl_concurrency;
  std::string crawl_hosts;
  subs["crawl"]->add_option("--rate", rate_ms, "Minimum milliseconds between requests to one host");
  subs["crawl"]->add_option("--concurrency", crawl_concurrency, "Hosts crawled at once");
  subs["crawl"]->add_option("--hosts", crawl_hosts, "File of host ids or addresses to crawl, one per line (or a comma list)");

  std::optional<std::string> dest;
  std::optional<std::size_t> retries;
  std::optional<long> timeout_mins;
  subs["clone"]->add_option("--dest", dest, "Clone destination directory");
  subs["clone"]->add_option("--retries", retries, "Retries after a failed clone");
  subs["clone"]->add_option("--timeout-mins", timeout_mins, "Per-clone timeout in minutes");

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = config_file.empty() ? Config() : Config::load(config_file);
    if (seed) config.set_seed(*seed);
    if (rate_ms) config.set("crawl", "rate_ms", *rate_ms);
    if (crawl_concurrency) config.set("crawl", "concurrency", *crawl_concurrency);
    if (!crawl_hosts.empty()) config.set("crawl", "hosts", host_selection(crawl_hosts));
    if (dest) config.set("clone", "dest", *dest);
    if (retries) config.set("clone", "retries", *retries);
    if (timeout_mins) config.set("clone", "timeout_mins", *timeout_mins);

    CorpusStore store(store_dir);
    Pipeline pipeline(std::move(config), store, {}, {force, quiet ? nullptr : &std::cerr});
    nlohmann::json summary;
    if (subs["run-all"]->parsed()) {
      summary = pipeline.run_all();
    } else {
      for (const auto s : kStages)
        if (subs[std::string(to_string(s))]->parsed()) summary = pipeline.run_stage(s);
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const StageRefused& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
