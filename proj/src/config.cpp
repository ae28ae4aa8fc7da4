#include "forgescope/config.hpp"

#include <fstream>

#include <openssl/evp.h>

#include "forgescope/errors.hpp"

namespace forgescope {

namespace fs = std::filesystem;
using nlohmann::json;

const json& Config::defaults() {
  static const json d = json::parse(R"({
    "seed": 1,
    "scan": {
      "hosts_file": null,
      "rules_file": null,
      "api": "none",
      "api_base_url": "https://api.shodan.io",
      "api_key_env": "SHODAN_API_KEY",
      "max_pages_per_rule": 100
    },
    "probe": {
      "concurrency": 16,
      "connect_timeout_ms": 10000,
      "read_timeout_ms": 30000,
      "verify_tls": true
    },
    "crawl": {
      "rate_ms": 1000,
      "concurrency": 32,
      "page_size": 50,
      "max_pages": 10000,
      "max_redirects": 5,
      "hosts": []
    },
    "clone": {
      "dest": "repos",
      "retries": 2,
      "timeout_mins": 30,
      "concurrency": 8,
      "preflight": true
    },
    "extract": {
      "concurrency": 4
    },
    "comparison": {
      "events_file": null,
      "clone_base_url": "https://github.com",
      "factor": 1.5
    },
    "dedup": {
      "max_attempts": 3,
      "concurrency": 4,
      "github": {
        "enabled": true,
        "base_url": "https://api.github.com",
        "token_env": "GITHUB_TOKEN",
        "min_interval_ms": 2000
      },
      "software_heritage": {
        "enabled": true,
        "base_url": "https://archive.softwareheritage.org",
        "token_env": "SWH_TOKEN",
        "min_interval_ms": 1000
      }
    },
    "label": {
      "domains_file": null,
      "geo_db": null,
      "threshold": 0.5,
      "extra_denylist": [],
      "static_hosts": {}
    },
    "stats": {
      "rare_language_threshold": 1000,
      "baseline_language": "JavaScript",
      "tolerance": 1e-8,
      "max_iterations": 100
    },
    "report": {
      "population_file": null,
      "reference_label": "self-hosted",
      "comparison_label": "github"
    }
  })");
  return d;
}

Config::Config() : doc_(defaults()), base_dir_(fs::current_path()) {}

Config Config::from_json(const json& overrides, fs::path base_dir) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  Config c;
  for (const auto& [key, value] : overrides.items()) {
    if (!c.doc_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (c.doc_[key].is_object() && value.is_object()) {
      for (const auto& [k, v] : value.items()) {
        if (!c.doc_[key].contains(k)) throw ConfigError("unknown config key '" + key + "." + k + "'");
        if (c.doc_[key][k].is_object() && v.is_object()) c.doc_[key][k].merge_patch(v);
        else c.doc_[key][k] = v;
      }
    } else {
      c.doc_[key] = value;
    }
  }
  c.base_dir_ = std::move(base_dir);
  return c;
}

Config Config::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  return from_json(doc, fs::absolute(file).parent_path());
}

const json& Config::section(const std::string& name) const {
  if (!doc_.contains(name)) throw ConfigError("no config section '" + name + "'");
  return doc_.at(name);
}

void Config::set(const std::string& section, const std::string& key, json value) {
  doc_[section][key] = std::move(value);
}

std::optional<fs::path> Config::path(const std::string& section, const std::string& key) const {
  const auto& v = this->section(section).at(key);
  if (v.is_null()) return std::nullopt;
  const auto s = v.get<std::string>();
  if (s.empty()) return std::nullopt;
  const fs::path p(s);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::string config_hash(const json& value) {
  const auto text = value.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace forgescope
