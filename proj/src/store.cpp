#include "forgescope/store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "forgescope/errors.hpp"

namespace forgescope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Scan: return "scan";
    case Stage::Probe: return "probe";
    case Stage::Crawl: return "crawl";
    case Stage::Clone: return "clone";
    case Stage::Extract: return "extract";
    case Stage::Metrics: return "metrics";
    case Stage::Dedup: return "dedup";
    case Stage::Label: return "label";
    case Stage::Stats: return "stats";
    case Stage::Report: return "report";
  }
  return "?";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (auto st : kStages)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

CorpusStore::CorpusStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StoreError("cannot create store " + root_.string() + ": " + ec.message());
  const auto lock_path = root_ / ".lock";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StoreError("cannot open " + lock_path.string() + ": " + std::strerror(errno));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw StoreError("store " + root_.string() + " is in use by another pipeline instance");
  }
  const auto manifest_path = root_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      manifest_ = json::parse(in);
    } catch (const json::parse_error& e) {
      throw StoreError("corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
  } else {
    manifest_ = json{{"stages", json::object()}};
  }
}

CorpusStore::~CorpusStore() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

fs::path CorpusStore::stage_dir(Stage s) const { return root_ / std::string(to_string(s)); }

std::optional<StageRecord> CorpusStore::record(Stage s) const {
  const auto& stages = manifest_.at("stages");
  const auto key = std::string(to_string(s));
  if (!stages.contains(key)) return std::nullopt;
  const auto& r = stages.at(key);
  return StageRecord{r.at("config_hash").get<std::string>(), r.at("completed").get<bool>(),
                     r.value("summary", json::object())};
}

void CorpusStore::mark_complete(Stage s, const std::string& hash, const json& summary) {
  manifest_["stages"][std::string(to_string(s))] = {{"config_hash", hash}, {"completed", true}, {"summary", summary}};
  save();
}

void CorpusStore::invalidate(Stage s) {
  manifest_["stages"].erase(std::string(to_string(s)));
  save();
}

void CorpusStore::set_seed(std::uint64_t seed) {
  manifest_["seed"] = seed;
  save();
}

void CorpusStore::save() const {
  const auto path = root_ / "manifest.json";
  const auto tmp = root_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << manifest_.dump(2) << '\n';
    if (!out) throw StoreError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace forgescope
