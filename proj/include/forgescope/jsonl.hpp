#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"

namespace forgescope::jsonl {

using nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line. Lines that fail
/// to parse are passed to `on_error` when provided, otherwise rethrown.
inline void for_each(const std::filesystem::path& path,
                     const std::function<void(const json&, std::size_t)>& fn,
                     const std::function<void(std::size_t, const std::string&)>& on_error = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      if (on_error) {
        on_error(line_no, e.what());
        continue;
      }
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(record, line_no);
  }
}

inline std::vector<json> read_all(const std::filesystem::path& path) {
  std::vector<json> out;
  if (!std::filesystem::exists(path)) return out;
  for_each(path, [&](const json& j, std::size_t) { out.push_back(j); });
  return out;
}

/// Overwrites `path` atomically with one record per line.
inline void write_all(const std::filesystem::path& path, const std::vector<json>& records) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp);
    for (const auto& r : records) out << r.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    out.flush();
    if (!out) throw StoreError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

/// Append-only JSON-lines file shared by concurrent writers.
class Appender {
 public:
  explicit Appender(std::filesystem::path path) : path_(std::move(path)) {
    std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app);
    if (!out_) throw StoreError("cannot open " + path_.string() + " for append");
  }

  void append(const json& record) {
    std::lock_guard lock(mu_);
    out_ << record.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    out_.flush();
    if (!out_) throw StoreError("append failed: " + path_.string());
  }

  void append_all(const std::vector<json>& records) {
    std::lock_guard lock(mu_);
    for (const auto& r : records) out_ << r.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    out_.flush();
    if (!out_) throw StoreError("append failed: " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace forgescope::jsonl
