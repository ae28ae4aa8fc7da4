#include "forgescope/crawler.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"
#include "forgescope/parallel.hpp"
#include "forgescope/text.hpp"

namespace forgescope {

using nlohmann::json;

std::string RepoRef::id() const { return host.id() + "/" + owner + "/" + name; }

void to_json(json& j, const RepoRef& r) {
  j = json{{"host", r.host},           {"owner", r.owner},
           {"name", r.name},           {"clone_url", r.clone_url},
           {"discovered_at", format_iso8601(r.discovered_at)}};
}

void from_json(const json& j, RepoRef& r) {
  r.host = j.at("host").get<HostKey>();
  r.owner = j.at("owner").get<std::string>();
  r.name = j.at("name").get<std::string>();
  r.clone_url = j.at("clone_url").get<std::string>();
  r.discovered_at = j.contains("discovered_at") ? parse_iso8601_or_throw(j["discovered_at"].get<std::string>())
                                                : Timestamp{};
}

std::string_view to_string(CrawlStatusKind k) {
  switch (k) {
    case CrawlStatusKind::Listed: return "Listed";
    case CrawlStatusKind::Unreachable: return "Unreachable";
    case CrawlStatusKind::NoPublicRepos: return "NoPublicRepos";
    case CrawlStatusKind::LoginRequired: return "LoginRequired";
  }
  return "Unreachable";
}

CrawlStatusKind crawl_status_from_string(std::string_view s) {
  for (auto k : {CrawlStatusKind::Listed, CrawlStatusKind::Unreachable, CrawlStatusKind::NoPublicRepos,
                 CrawlStatusKind::LoginRequired})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown crawl status: " + std::string(s));
}

namespace {

/// Applies the host's request pacing to every request, redirect hops included.
class PacedFetcher final : public http::Fetcher {
 public:
  PacedFetcher(http::Fetcher& inner, RequestPacer& pacer) : inner_(inner), pacer_(pacer) {}
  http::Result get(const http::Url& url, const http::Headers& headers) override {
    pacer_.wait();
    return inner_.get(url, headers);
  }

 private:
  http::Fetcher& inner_;
  RequestPacer& pacer_;
};

enum class PageKind { Ok, Transport, Login, NotFound, CrossDomain, HttpError };

struct Page {
  PageKind kind = PageKind::Ok;
  std::string body;
  std::string detail;
};

bool looks_like_login(const http::Url& url) {
  const auto path = text::to_lower(url.target);
  return path.find("sign_in") != std::string::npos || path.find("/login") != std::string::npos;
}

Page fetch_page(http::Fetcher& fetcher, const http::Url& url, int max_redirects) {
  const auto outcome = http::get_following(fetcher, url, max_redirects, {{"Accept", "application/json"}});
  if (const auto* err = std::get_if<http::TransportError>(&outcome.result))
    return {PageKind::Transport, {}, std::string(http::to_string(err->kind)) + ": " + err->message};
  if (outcome.cross_domain_target)
    return {PageKind::CrossDomain, {}, "redirect to " + outcome.cross_domain_target->str() + " not followed"};
  const auto& response = std::get<http::Response>(outcome.result);
  if (outcome.depth_exceeded) return {PageKind::HttpError, {}, "redirect depth exceeded"};
  if (response.status == 401 || response.status == 403) return {PageKind::Login, {}, "HTTP " + std::to_string(response.status)};
  if (response.status == 200 && !outcome.chain.empty() && looks_like_login(outcome.final_url))
    return {PageKind::Login, {}, "redirected to " + outcome.final_url.target};
  if (response.status == 404 || response.status == 410) return {PageKind::NotFound, {}, "HTTP 404"};
  if (response.status < 200 || response.status >= 300)
    return {PageKind::HttpError, {}, "HTTP " + std::to_string(response.status)};
  return {PageKind::Ok, response.body, {}};
}

struct ListingItem {
  std::string owner;
  std::string name;
  std::string clone_url;
};

std::string fallback_clone_url(const HostKey& host, const std::string& owner, const std::string& name) {
  return host.origin() + "/" + owner + "/" + name + ".git";
}

bool usable_url(const std::string& s) {
  try {
    (void)http::Url::parse(s);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

/// Gitea / Gogs /api/v1/repos/search payload: {"ok":..,"data":[...]} or a bare array.
std::vector<ListingItem> parse_gitea_listing(const std::string& body, const HostKey& host) {
  const auto j = json::parse(body);
  const json* items = &j;
  if (j.is_object()) items = &j.at("data");
  if (!items->is_array()) throw std::runtime_error("listing is not an array");
  std::vector<ListingItem> out;
  for (const auto& item : *items) {
    ListingItem li;
    li.name = item.at("name").get<std::string>();
    if (item.contains("owner") && item["owner"].is_object()) {
      const auto& owner = item["owner"];
      if (owner.contains("login") && owner["login"].is_string()) li.owner = owner["login"].get<std::string>();
      else if (owner.contains("username") && owner["username"].is_string()) li.owner = owner["username"].get<std::string>();
    }
    if (li.owner.empty() && item.contains("full_name")) {
      const auto full = item["full_name"].get<std::string>();
      li.owner = full.substr(0, full.rfind('/'));
    }
    if (li.owner.empty() || li.name.empty()) throw std::runtime_error("listing item without owner/name");
    if (item.contains("clone_url") && item["clone_url"].is_string()) li.clone_url = item["clone_url"].get<std::string>();
    if (!usable_url(li.clone_url)) li.clone_url = fallback_clone_url(host, li.owner, li.name);
    out.push_back(std::move(li));
  }
  return out;
}

/// GitLab /api/v4/projects payload: a bare array.
std::vector<ListingItem> parse_gitlab_listing(const std::string& body, const HostKey& host) {
  const auto j = json::parse(body);
  if (!j.is_array()) throw std::runtime_error("listing is not an array");
  std::vector<ListingItem> out;
  for (const auto& item : j) {
    ListingItem li;
    li.name = item.at("path").get<std::string>();
    if (item.contains("namespace") && item["namespace"].is_object() && item["namespace"].contains("full_path"))
      li.owner = item["namespace"]["full_path"].get<std::string>();
    if (li.owner.empty() && item.contains("path_with_namespace")) {
      const auto full = item["path_with_namespace"].get<std::string>();
      li.owner = full.substr(0, full.rfind('/'));
    }
    if (li.owner.empty() || li.name.empty()) throw std::runtime_error("listing item without namespace/path");
    if (item.contains("http_url_to_repo") && item["http_url_to_repo"].is_string())
      li.clone_url = item["http_url_to_repo"].get<std::string>();
    if (!usable_url(li.clone_url)) li.clone_url = fallback_clone_url(host, li.owner, li.name);
    out.push_back(std::move(li));
  }
  return out;
}

std::vector<ListingItem> parse_explore_html(const std::string& body, const HostKey& host, ForgeKind kind) {
  static const std::regex gitea_link(R"re(<a[^>]*class="[^"]*\bname\b[^"]*"[^>]*href="/([^/"?#]+)/([^/"?#]+)")re");
  static const std::regex gitlab_link(R"re(<a[^>]*class="[^"]*\bproject\b[^"]*"[^>]*href="/([^"?#]+)/([^/"?#]+)")re");
  const auto& re = kind == ForgeKind::GitLabCE ? gitlab_link : gitea_link;
  std::vector<ListingItem> out;
  const std::string page = text::decode_lenient(body);
  for (auto it = std::sregex_iterator(page.begin(), page.end(), re); it != std::sregex_iterator(); ++it) {
    ListingItem li{(*it)[1].str(), (*it)[2].str(), {}};
    li.clone_url = fallback_clone_url(host, li.owner, li.name);
    out.push_back(std::move(li));
  }
  return out;
}

http::Url host_url(const HostKey& host, std::string target) {
  http::Url u;
  u.scheme = host.scheme;
  u.host = host.address;
  u.port = host.port;
  u.target = std::move(target);
  return u;
}

std::string api_target(ForgeKind kind, std::size_t page, std::size_t page_size) {
  if (kind == ForgeKind::GitLabCE)
    return "/api/v4/projects?visibility=public&simple=true&order_by=id&sort=asc&per_page=" +
           std::to_string(std::min<std::size_t>(page_size, 100)) + "&page=" + std::to_string(page);
  return "/api/v1/repos/search?q=&limit=" + std::to_string(page_size) + "&page=" + std::to_string(page);
}

std::string html_target(ForgeKind kind, std::size_t page) {
  if (kind == ForgeKind::GitLabCE) return "/explore/projects?page=" + std::to_string(page);
  return "/explore/repos?page=" + std::to_string(page);
}

enum class Mode { Api, Html };

}  // namespace

HostCrawl enumerate_repos(const HostRecord& host, http::Fetcher& fetcher, const CrawlLimits& limits, Timestamp now) {
  HostCrawl out;
  out.host = host.key;
  if (host.kind == ForgeKind::Unknown) {
    out.status = {CrawlStatusKind::Unreachable, 0};
    out.annotations.push_back("host is not fingerprinted as a supported forge");
    return out;
  }
  RequestPacer pacer(limits.min_interval);
  PacedFetcher paced(fetcher, pacer);
  std::set<std::pair<std::string, std::string>> seen;
  const std::size_t page_size = host.kind == ForgeKind::GitLabCE ? std::min<std::size_t>(limits.page_size, 100)
                                                                 : limits.page_size;

  auto add_items = [&](const std::vector<ListingItem>& items) {
    std::size_t added = 0;
    for (const auto& li : items) {
      if (!seen.emplace(li.owner, li.name).second) continue;
      out.repos.push_back(RepoRef{host.key, li.owner, li.name, li.clone_url, now});
      ++added;
    }
    return added;
  };

  Mode mode = Mode::Api;
  std::optional<CrawlStatusKind> terminal;
  bool tried_html = false;
  std::size_t page = 1;
  for (;;) {
    if (page > limits.max_pages) {
      out.annotations.push_back("pagination cap of " + std::to_string(limits.max_pages) + " pages reached");
      break;
    }
    const auto target = mode == Mode::Api ? api_target(host.kind, page, page_size) : html_target(host.kind, page);
    const auto result = fetch_page(paced, host_url(host.key, target), limits.max_redirects);
    const bool first = page == 1;
    if (result.kind == PageKind::Transport || result.kind == PageKind::CrossDomain || result.kind == PageKind::HttpError) {
      out.annotations.push_back("page " + std::to_string(page) + ": " + result.detail);
      if (first && out.repos.empty()) terminal = CrawlStatusKind::Unreachable;
      break;
    }
    if (result.kind == PageKind::Login) {
      out.annotations.push_back("page " + std::to_string(page) + ": login required (" + result.detail + ")");
      if (out.repos.empty()) terminal = CrawlStatusKind::LoginRequired;
      break;
    }
    if (result.kind == PageKind::NotFound) {
      if (mode == Mode::Api && first && !tried_html) {
        out.annotations.push_back("listing API unavailable; using HTML explore pages");
        mode = Mode::Html;
        tried_html = true;
        continue;
      }
      out.annotations.push_back("page " + std::to_string(page) + ": listing endpoint not found");
      break;
    }
    std::vector<ListingItem> items;
    try {
      if (mode == Mode::Html) items = parse_explore_html(result.body, host.key, host.kind);
      else if (host.kind == ForgeKind::GitLabCE) items = parse_gitlab_listing(result.body, host.key);
      else items = parse_gitea_listing(result.body, host.key);
    } catch (const std::exception& e) {
      out.annotations.push_back("page " + std::to_string(page) + ": parse failure: " + e.what());
      break;
    }
    if (items.empty() && first && mode == Mode::Api && host.kind == ForgeKind::Gogs && !tried_html) {
      // Gogs answers an empty-keyword search with no results; confirm via HTML.
      mode = Mode::Html;
      tried_html = true;
      continue;
    }
    const auto added = add_items(items);
    if (mode == Mode::Html) {
      if (added == 0) break;
    } else if (items.size() < page_size) {
      break;
    }
    ++page;
  }

  if (terminal) {
    out.status = {*terminal, 0};
  } else if (out.repos.empty()) {
    out.status = {CrawlStatusKind::NoPublicRepos, 0};
  } else {
    out.status = {CrawlStatusKind::Listed, out.repos.size()};
  }
  return out;
}

// ---------------------------------------------------------------------------

CrawlStore::CrawlStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  load();
  repo_log_ = std::make_unique<jsonl::Appender>(dir_ / "repos.jsonl");
  status_log_ = std::make_unique<jsonl::Appender>(dir_ / "host_status.jsonl");
}

void CrawlStore::load() {
  std::map<std::string, std::vector<RepoRef>> pending;
  if (std::filesystem::exists(dir_ / "repos.jsonl")) {
    jsonl::for_each(dir_ / "repos.jsonl", [&](const json& j, std::size_t) {
      pending[j.at("crawl").get<std::string>()].push_back(j.at("repo").get<RepoRef>());
    }, [](std::size_t, const std::string&) {});
  }
  if (std::filesystem::exists(dir_ / "host_status.jsonl")) {
    jsonl::for_each(dir_ / "host_status.jsonl", [&](const json& j, std::size_t) {
      const auto host = j.at("host").get<HostKey>();
      statuses_[host] = {crawl_status_from_string(j.at("status").get<std::string>()), j.value("repo_count", std::size_t{0})};
      crawl_tokens_[host] = j.at("crawl").get<std::string>();
    }, [](std::size_t, const std::string&) {});
  }
  for (const auto& [host, token] : crawl_tokens_) {
    if (auto it = pending.find(token); it != pending.end()) repos_by_token_[token] = std::move(it->second);
  }
}

bool CrawlStore::has_status(const HostKey& host) const {
  std::lock_guard lock(mu_);
  return statuses_.contains(host);
}

std::optional<HostCrawlStatus> CrawlStore::status(const HostKey& host) const {
  std::lock_guard lock(mu_);
  if (auto it = statuses_.find(host); it != statuses_.end()) return it->second;
  return std::nullopt;
}

void CrawlStore::record(const HostCrawl& crawl) {
  std::string token;
  {
    std::lock_guard lock(mu_);
    token = crawl.host.id() + "#" + std::to_string(now_utc().time_since_epoch().count()) + "." +
            std::to_string(++counter_) + "." + std::to_string(statuses_.size());
  }
  std::vector<json> repo_lines;
  repo_lines.reserve(crawl.repos.size());
  for (const auto& r : crawl.repos) repo_lines.push_back(json{{"crawl", token}, {"repo", r}});
  repo_log_->append_all(repo_lines);
  json status{{"crawl", token},
              {"host", crawl.host},
              {"status", to_string(crawl.status.kind)},
              {"repo_count", crawl.status.repo_count},
              {"annotations", crawl.annotations}};
  status_log_->append(status);
  std::lock_guard lock(mu_);
  statuses_[crawl.host] = crawl.status;
  if (auto old = crawl_tokens_.find(crawl.host); old != crawl_tokens_.end()) repos_by_token_.erase(old->second);
  crawl_tokens_[crawl.host] = token;
  repos_by_token_[token] = crawl.repos;
}

std::vector<RepoRef> CrawlStore::repos() const {
  std::lock_guard lock(mu_);
  std::vector<RepoRef> out;
  for (const auto& [host, token] : crawl_tokens_) {
    if (auto it = repos_by_token_.find(token); it != repos_by_token_.end())
      out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

std::map<HostKey, HostCrawlStatus> CrawlStore::statuses() const {
  std::lock_guard lock(mu_);
  return statuses_;
}

CrawlSummary crawl_corpus(std::span<const HostRecord> hosts, http::Fetcher& fetcher, const CrawlLimits& limits,
                          CrawlStore& store, bool force) {
  CrawlSummary summary;
  std::vector<const HostRecord*> todo;
  std::set<HostKey> queued;
  for (const auto& h : hosts) {
    if (h.kind == ForgeKind::Unknown) {
      ++summary.hosts_not_fingerprinted;
      continue;
    }
    if (!queued.insert(h.key).second) continue;
    if (!force && store.has_status(h.key)) {
      ++summary.hosts_skipped;
      continue;
    }
    todo.push_back(&h);
  }
  std::mutex mu;
  parallel_for(todo.size(), limits.max_concurrent_hosts, [&](std::size_t i) {
    const auto crawl = enumerate_repos(*todo[i], fetcher, limits);
    store.record(crawl);
    std::lock_guard lock(mu);
    ++summary.hosts_crawled;
  });
  for (const auto& key : queued) {
    if (const auto st = store.status(key)) {
      ++summary.counts[st->kind];
      summary.repos_found += st->repo_count;
    }
  }
  return summary;
}

}  // namespace forgescope
