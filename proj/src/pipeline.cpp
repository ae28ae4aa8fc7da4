#include "forgescope/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>

#include "forgescope/cloner.hpp"
#include "forgescope/comparison.hpp"
#include "forgescope/crawler.hpp"
#include "forgescope/dedup.hpp"
#include "forgescope/errors.hpp"
#include "forgescope/fingerprint.hpp"
#include "forgescope/git_extract.hpp"
#include "forgescope/jsonl.hpp"
#include "forgescope/metrics.hpp"
#include "forgescope/parallel.hpp"
#include "forgescope/report.hpp"
#include "forgescope/stats.hpp"
#include "forgescope/text.hpp"

namespace forgescope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kReference = "reference";
constexpr const char* kComparison = "comparison";

void write_text(const fs::path& file, const std::string& content) {
  fs::create_directories(file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp);
    out << content;
    if (!out) throw StoreError("write failed: " + tmp);
  }
  fs::rename(tmp, file);
}

void write_json(const fs::path& file, const json& value) { write_text(file, value.dump(2) + "\n"); }

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw StoreError("missing stage output " + file.string());
  return json::parse(in);
}

std::vector<HostRecord> read_hosts(const fs::path& file) {
  std::vector<HostRecord> out;
  for (const auto& j : jsonl::read_all(file)) out.push_back(j.get<HostRecord>());
  return out;
}

std::vector<std::string> string_list(const json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) {
    const auto whole = v.get<std::string>();
    std::vector<std::string> out;
    for (auto part : text::split(whole, ','))
      if (!text::trim(part).empty()) out.emplace_back(text::trim(part));
    return out;
  }
  return v.get<std::vector<std::string>>();
}

/// Resolver with fixed answers for configured names, falling back to DNS.
class MappedResolver final : public label::Resolver {
 public:
  explicit MappedResolver(std::map<std::string, std::string> fixed) : fixed_(std::move(fixed)) {}
  std::vector<std::string> resolve(const std::string& hostname) const override {
    if (const auto it = fixed_.find(text::to_lower(hostname)); it != fixed_.end()) return {it->second};
    return system_.resolve(hostname);
  }

 private:
  std::map<std::string, std::string> fixed_;
  label::SystemResolver system_;
};

struct IndexEntry {
  std::string repo_id;
  std::string corpus;
  HostKey host;
  std::string file;  // relative to the extract stage directory
  std::string status;
  std::string error;
  std::string first_month;
};

json to_json(const IndexEntry& e) {
  return {{"repo_id", e.repo_id}, {"corpus", e.corpus},     {"host", e.host},
          {"file", e.file},       {"status", e.status},     {"error", e.error},
          {"first_commit_month", e.first_month}};
}

IndexEntry index_from_json(const json& j) {
  return {j.at("repo_id").get<std::string>(), j.at("corpus").get<std::string>(), j.at("host").get<HostKey>(),
          j.at("file").get<std::string>(),    j.at("status").get<std::string>(), j.value("error", ""),
          j.value("first_commit_month", "")};
}

struct CorpusMetrics {
  std::vector<metrics::RepoMetrics> reference;
  std::vector<metrics::RepoMetrics> comparison;
};

}  // namespace

Pipeline::Pipeline(Config config, CorpusStore& store, Services services, PipelineOptions options)
    : config_(std::move(config)), store_(store), services_(services), options_(options) {}

Pipeline::~Pipeline() = default;

void Pipeline::log(const std::string& line) const {
  if (options_.log) *options_.log << line << '\n' << std::flush;
}

http::Fetcher& Pipeline::fetcher() {
  if (services_.fetcher) return *services_.fetcher;
  if (!owned_fetcher_) {
    const auto& p = config_.section("probe");
    http::FetcherOptions o;
    o.connect_timeout = std::chrono::milliseconds(p.at("connect_timeout_ms").get<long>());
    o.read_timeout = std::chrono::milliseconds(p.at("read_timeout_ms").get<long>());
    o.verify_tls = p.at("verify_tls").get<bool>();
    owned_fetcher_ = std::make_unique<http::NetworkFetcher>(o);
  }
  return *owned_fetcher_;
}

json Pipeline::stage_config(Stage stage) const {
  const auto& d = config_.doc();
  switch (stage) {
    case Stage::Scan: return {{"scan", d.at("scan")}};
    case Stage::Probe: return {{"probe", d.at("probe")}, {"rules_file", d.at("scan").at("rules_file")}};
    case Stage::Crawl: return {{"crawl", d.at("crawl")}};
    case Stage::Clone: return {{"clone", d.at("clone")}};
    case Stage::Extract:
      return {{"extract", d.at("extract")}, {"comparison", d.at("comparison")}, {"seed", d.at("seed")}};
    case Stage::Metrics: return json::object();
    case Stage::Dedup: return {{"dedup", d.at("dedup")}};
    case Stage::Label: return {{"label", d.at("label")}};
    case Stage::Stats: return {{"stats", d.at("stats")}};
    case Stage::Report: return {{"report", d.at("report")}};
  }
  return json::object();
}

json Pipeline::run_stage(Stage stage) {
  const auto name = std::string(to_string(stage));
  for (const auto up : kStages) {
    if (up == stage) break;
    const auto rec = store_.record(up);
    if (!rec || !rec->completed)
      throw StageRefused("cannot run " + name + ": upstream stage '" + std::string(to_string(up)) +
                         "' has not completed");
    if (rec->config_hash != config_hash(stage_config(up)) && !options_.force)
      throw StageRefused("cannot run " + name + ": configuration of stage '" + std::string(to_string(up)) +
                         "' changed since it ran (rerun it, or pass --force)");
  }
  const auto hash = config_hash(stage_config(stage));
  if (const auto rec = store_.record(stage); rec && rec->completed && !options_.force) {
    if (rec->config_hash == hash) {
      log(name + ": already complete");
      return {{"noop", true}};
    }
    throw StageRefused("stage " + name + " already ran under a different configuration (pass --force to rerun)");
  }

  log(name + ": running");
  json summary;
  switch (stage) {
    case Stage::Scan: summary = scan(); break;
    case Stage::Probe: summary = probe(); break;
    case Stage::Crawl: summary = crawl(); break;
    case Stage::Clone: summary = clone(); break;
    case Stage::Extract: summary = extract(); break;
    case Stage::Metrics: summary = compute_metrics(); break;
    case Stage::Dedup: summary = dedup(); break;
    case Stage::Label: summary = label(); break;
    case Stage::Stats: summary = stats(); break;
    case Stage::Report: summary = report(); break;
  }
  store_.set_seed(config_.seed());
  store_.mark_complete(stage, hash, summary);
  // Later stages were computed from the previous output of this one.
  bool later = false;
  for (const auto s : kStages) {
    if (later && store_.record(s)) store_.invalidate(s);
    if (s == stage) later = true;
  }
  log(name + ": " + summary.dump());
  return summary;
}

json Pipeline::run_all() {
  json out = json::object();
  for (const auto s : kStages) out[std::string(to_string(s))] = run_stage(s);
  return out;
}

// --- scan / probe / crawl -----------------------------------------------------

namespace {

std::vector<FingerprintRule> rules_from(const Config& c) {
  if (const auto p = c.path("scan", "rules_file")) return load_rules(*p);
  return default_rules();
}

}  // namespace

json Pipeline::scan() {
  const auto& cfg = config_.section("scan");
  std::vector<HostRecord> hosts;
  std::vector<json> skipped;
  json summary = json::object();
  if (const auto file = config_.path("scan", "hosts_file")) {
    auto ingest = ingest_host_list(*file);
    for (auto& r : ingest.records) merge_host(hosts, std::move(r));
    for (const auto& s : ingest.skipped)
      skipped.push_back({{"line", s.line}, {"text", s.text}, {"reason", s.reason}});
  }
  const auto api = cfg.at("api").get<std::string>();
  if (api == "shodan") {
    auto client = ShodanClient::from_environment(fetcher(), http::Url::parse(cfg.at("api_base_url").get<std::string>()),
                                                 cfg.at("api_key_env").get<std::string>());
    const auto rules = rules_from(config_);
    ScanLimits limits;
    limits.max_pages_per_rule = cfg.at("max_pages_per_rule").get<int>();
    auto outcome = query_scan_api(client, rules, limits);
    for (auto& r : outcome.records) merge_host(hosts, std::move(r));
    summary["api_warnings"] = outcome.warnings;
    if (outcome.error) summary["api_error"] = to_string(*outcome.error);
  } else if (api != "none") {
    throw ConfigError("scan.api must be \"shodan\" or \"none\"");
  }
  std::sort(hosts.begin(), hosts.end(), [](const HostRecord& a, const HostRecord& b) { return a.key < b.key; });
  std::vector<json> lines;
  for (const auto& h : hosts) lines.push_back(h);
  jsonl::write_all(store_.stage_dir(Stage::Scan) / "hosts.jsonl", lines);
  jsonl::write_all(store_.stage_dir(Stage::Scan) / "skipped.jsonl", skipped);
  summary["hosts"] = hosts.size();
  summary["skipped_lines"] = skipped.size();
  return summary;
}

json Pipeline::probe() {
  const auto hosts = read_hosts(store_.stage_dir(Stage::Scan) / "hosts.jsonl");
  const auto rules = rules_from(config_);
  const auto probed =
      probe_hosts(hosts, fetcher(), rules, config_.section("probe").at("concurrency").get<std::size_t>());
  std::vector<json> lines;
  std::map<std::string, std::size_t> counts;
  for (const auto& h : probed) {
    lines.push_back(h);
    ++counts[std::string(to_string(h.kind))];
  }
  jsonl::write_all(store_.stage_dir(Stage::Probe) / "hosts.jsonl", lines);
  return {{"hosts", probed.size()}, {"kinds", counts}};
}

json Pipeline::crawl() {
  const auto& cfg = config_.section("crawl");
  auto hosts = read_hosts(store_.stage_dir(Stage::Probe) / "hosts.jsonl");
  const auto only = string_list(cfg.at("hosts"));
  if (!only.empty()) {
    std::erase_if(hosts, [&](const HostRecord& h) {
      return std::none_of(only.begin(), only.end(),
                          [&](const std::string& s) { return s == h.key.id() || s == h.key.address; });
    });
  }
  CrawlLimits limits;
  limits.min_interval = std::chrono::milliseconds(cfg.at("rate_ms").get<long>());
  limits.max_concurrent_hosts = cfg.at("concurrency").get<std::size_t>();
  limits.page_size = cfg.at("page_size").get<std::size_t>();
  limits.max_pages = cfg.at("max_pages").get<std::size_t>();
  limits.max_redirects = cfg.at("max_redirects").get<int>();
  CrawlStore crawl_store(store_.stage_dir(Stage::Crawl));
  const auto s = crawl_corpus(hosts, fetcher(), limits, crawl_store, options_.force);
  json counts = json::object();
  for (const auto& [k, n] : s.counts) counts[std::string(to_string(k))] = n;
  return {{"hosts_crawled", s.hosts_crawled},
          {"hosts_skipped", s.hosts_skipped},
          {"hosts_not_fingerprinted", s.hosts_not_fingerprinted},
          {"repos_found", s.repos_found},
          {"statuses", counts}};
}

// --- clone / extract ------------------------------------------------------------

namespace {

CloneLimits clone_limits(const Config& c) {
  const auto& cfg = c.section("clone");
  CloneLimits l;
  l.retries = cfg.at("retries").get<std::size_t>();
  l.timeout = std::chrono::minutes(cfg.at("timeout_mins").get<long>());
  l.max_concurrent = cfg.at("concurrency").get<std::size_t>();
  return l;
}

fs::path clone_dest(const Config& c, const CorpusStore& store) {
  const fs::path dest = c.section("clone").at("dest").get<std::string>();
  return dest.is_absolute() ? dest : store.root() / dest;
}

json clone_summary_json(const CloneSummary& s) {
  json counts = json::object();
  for (const auto& [k, n] : s.counts) counts[std::string(to_string(k))] = n;
  return {{"outcomes", counts}, {"attempts", s.attempts_made}};
}

}  // namespace

json Pipeline::clone() {
  const auto refs = CrawlStore(store_.stage_dir(Stage::Crawl)).repos();
  CloneStore outcomes(store_.stage_dir(Stage::Clone) / "clone_outcomes.jsonl");
  const bool preflight = config_.section("clone").at("preflight").get<bool>();
  const auto s = clone_corpus(refs, clone_dest(config_, store_), clone_limits(config_), outcomes,
                              preflight ? &fetcher() : nullptr);
  auto summary = clone_summary_json(s);
  summary["refs"] = refs.size();
  return summary;
}

json Pipeline::extract() {
  const auto dir = store_.stage_dir(Stage::Extract);
  const auto concurrency = config_.section("extract").at("concurrency").get<std::size_t>();

  struct Job {
    std::string repo_id;
    HostKey host;
    fs::path path;
  };
  auto run_jobs = [&](const std::vector<Job>& jobs, const std::string& corpus) {
    std::vector<IndexEntry> entries(jobs.size());
    parallel_for(jobs.size(), concurrency, [&](std::size_t i) {
      const auto& job = jobs[i];
      auto& e = entries[i];
      e.repo_id = job.repo_id;
      e.corpus = corpus;
      e.host = job.host;
      e.file = corpus + "/" + text::percent_encode_component(job.repo_id) + ".jsonl";
      try {
        const auto x = git::extract_repository(job.repo_id, job.path);
        git::write_extraction(dir / e.file, x);
        e.status = "ok";
        e.first_month = format_month(x.commits.front().author_time);
      } catch (const std::exception& ex) {
        e.status = "failed";
        e.error = ex.what();
      }
    });
    return entries;
  };
  auto jobs_from = [](const std::vector<RepoRef>& refs, const CloneStore& outcomes) {
    std::vector<Job> jobs;
    for (const auto& r : refs) {
      const auto rec = outcomes.latest(r.id());
      if (rec && rec->outcome.kind == CloneKind::Success) jobs.push_back({r.id(), r.host, rec->outcome.detail});
    }
    std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.repo_id < b.repo_id; });
    jobs.erase(std::unique(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.repo_id == b.repo_id; }),
               jobs.end());
    return jobs;
  };

  const auto refs = CrawlStore(store_.stage_dir(Stage::Crawl)).repos();
  const CloneStore ref_outcomes(store_.stage_dir(Stage::Clone) / "clone_outcomes.jsonl");
  auto index = run_jobs(jobs_from(refs, ref_outcomes), kReference);
  json summary = {{"reference_ok", std::count_if(index.begin(), index.end(), [](auto& e) { return e.status == "ok"; })},
                  {"reference_failed",
                   std::count_if(index.begin(), index.end(), [](auto& e) { return e.status != "ok"; })}};

  if (const auto events_file = config_.path("comparison", "events_file")) {
    comparison::MonthHistogram hist;
    for (const auto& e : index)
      if (e.status == "ok") ++hist[e.first_month];
    if (hist.empty()) {
      summary["comparison"] = "skipped: no extracted reference repositories";
    } else {
      const auto& cfg = config_.section("comparison");
      const auto plan = comparison::build_comparison_plan(hist, cfg.at("factor").get<double>());
      std::vector<std::string> skipped;
      const auto events = comparison::read_events(*events_file, &skipped);
      const auto ingest = comparison::ingest_comparison_corpus(
          events, plan, cfg.at("clone_base_url").get<std::string>(), config_.seed());
      write_json(dir / "comparison_plan.json", {{"factor", plan.factor},
                                                 {"histogram", hist},
                                                 {"targets", plan.targets},
                                                 {"sampled", ingest.sampled},
                                                 {"shortfall", ingest.shortfall},
                                                 {"annotations", ingest.annotations},
                                                 {"skipped_event_lines", skipped}});
      std::vector<json> lines;
      for (const auto& r : ingest.refs) lines.push_back(r);
      jsonl::write_all(dir / "comparison_refs.jsonl", lines);
      CloneStore cmp_outcomes(dir / "comparison_clone_outcomes.jsonl");
      const bool preflight = config_.section("clone").at("preflight").get<bool>();
      const auto cs = clone_corpus(ingest.refs, clone_dest(config_, store_), clone_limits(config_), cmp_outcomes,
                                   preflight ? &fetcher() : nullptr);
      auto cmp_index = run_jobs(jobs_from(ingest.refs, cmp_outcomes), kComparison);
      summary["comparison_planned"] = plan.total();
      summary["comparison_sampled"] = ingest.refs.size();
      summary["comparison_clone"] = clone_summary_json(cs);
      summary["comparison_ok"] =
          std::count_if(cmp_index.begin(), cmp_index.end(), [](auto& e) { return e.status == "ok"; });
      index.insert(index.end(), cmp_index.begin(), cmp_index.end());
    }
  }
  std::vector<json> lines;
  for (const auto& e : index) lines.push_back(to_json(e));
  jsonl::write_all(dir / "index.jsonl", lines);
  return summary;
}

// --- metrics ----------------------------------------------------------------------

namespace {

std::vector<IndexEntry> read_index(const CorpusStore& store) {
  std::vector<IndexEntry> out;
  for (const auto& j : jsonl::read_all(store.stage_dir(Stage::Extract) / "index.jsonl")) {
    auto e = index_from_json(j);
    if (e.status == "ok") out.push_back(std::move(e));
  }
  return out;
}

CorpusMetrics read_metrics(const CorpusStore& store) {
  CorpusMetrics m;
  for (const auto& j : jsonl::read_all(store.stage_dir(Stage::Metrics) / "metrics.jsonl")) {
    auto rm = j.at("metrics").get<metrics::RepoMetrics>();
    (j.at("corpus") == kReference ? m.reference : m.comparison).push_back(std::move(rm));
  }
  return m;
}

}  // namespace

json Pipeline::compute_metrics() {
  const auto entries = read_index(store_);
  std::vector<std::pair<std::string, metrics::RepoMetrics>> rows(entries.size());
  parallel_for(entries.size(), config_.section("extract").at("concurrency").get<std::size_t>(), [&](std::size_t i) {
    const auto x = git::read_extraction(store_.stage_dir(Stage::Extract) / entries[i].file);
    rows[i] = {entries[i].corpus, metrics::compute_repo_metrics(x.commits, x.snapshot, x.languages)};
  });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const int ca = a.first == kReference ? 0 : 1;
    const int cb = b.first == kReference ? 0 : 1;
    return std::tie(ca, a.second.repo_id) < std::tie(cb, b.second.repo_id);
  });
  std::vector<json> lines;
  std::string csv = metrics::csv_header() + "\n";
  std::map<std::string, std::size_t> counts;
  for (const auto& [corpus, m] : rows) {
    lines.push_back({{"corpus", corpus}, {"metrics", m}});
    csv += metrics::csv_row(m, corpus) + "\n";
    ++counts[corpus];
  }
  jsonl::write_all(store_.stage_dir(Stage::Metrics) / "metrics.jsonl", lines);
  write_text(store_.stage_dir(Stage::Metrics) / "metrics.csv", csv);
  return {{"repos", counts}};
}

// --- dedup ------------------------------------------------------------------------

json Pipeline::dedup() {
  const auto& cfg = config_.section("dedup");
  const auto dir = store_.stage_dir(Stage::Dedup);
  std::vector<RepoSnapshot> snapshots;
  for (const auto& e : read_index(store_))
    if (e.corpus == kReference)
      snapshots.push_back(git::read_extraction(store_.stage_dir(Stage::Extract) / e.file).snapshot);

  dedup::LookupCache cache(dir / "cache.jsonl");
  dedup::RetryPolicy policy;
  policy.max_attempts = cfg.at("max_attempts").get<std::size_t>();
  const auto concurrency = cfg.at("concurrency").get<std::size_t>();

  std::vector<dedup::OverlapReport> reports;
  std::vector<json> report_lines;
  std::vector<json> pending_lines;
  std::map<std::string, report::OverlapCounts> counts;
  auto run_target = [&](dedup::HashSearchClient& client) {
    auto& c = counts[client.target()];
    for (auto& result : dedup::check_corpus(snapshots, client, cache, policy, concurrency)) {
      ++c.checked;
      if (auto* r = std::get_if<dedup::OverlapReport>(&result)) {
        switch (r->overlap) {
          case dedup::OverlapClass::Novel: ++c.novel; break;
          case dedup::OverlapClass::DuplicateComplete: ++c.duplicate_complete; break;
          case dedup::OverlapClass::Diverged: ++c.diverged; break;
        }
        report_lines.push_back(*r);
        reports.push_back(std::move(*r));
      } else {
        ++c.pending;
        pending_lines.push_back(std::get<dedup::PendingCheck>(result));
      }
    }
  };
  auto token = [](const json& section) -> std::optional<std::string> {
    const char* v = std::getenv(section.at("token_env").get<std::string>().c_str());
    return v && *v ? std::optional<std::string>(v) : std::nullopt;
  };
  const auto& gh = cfg.at("github");
  const bool github_enabled = gh.at("enabled").get<bool>();
  if (github_enabled) {
    dedup::GitHubCommitSearch client(fetcher(), gh.at("base_url").get<std::string>(), token(gh),
                                     std::chrono::milliseconds(gh.at("min_interval_ms").get<long>()));
    run_target(client);
  }
  const auto& sh = cfg.at("software_heritage");
  if (sh.at("enabled").get<bool>()) {
    dedup::SoftwareHeritageClient client(fetcher(), sh.at("base_url").get<std::string>(), token(sh),
                                         std::chrono::milliseconds(sh.at("min_interval_ms").get<long>()));
    run_target(client);
  }
  const auto mirrors = dedup::intra_corpus_mirrors(snapshots);
  dedup::MarginSplit margin;
  if (github_enabled) {
    margin = dedup::margin_filter(snapshots, reports);
  } else {
    for (const auto& s : snapshots) margin.eligible.push_back(s.repo_id);
  }

  jsonl::write_all(dir / "reports.jsonl", report_lines);
  jsonl::write_all(dir / "pending.jsonl", pending_lines);
  json counts_json = json::object();
  for (const auto& [t, c] : counts)
    counts_json[t] = {{"checked", c.checked},
                      {"novel", c.novel},
                      {"duplicate_complete", c.duplicate_complete},
                      {"diverged", c.diverged},
                      {"pending", c.pending}};
  write_json(dir / "census.json", report::overlap_json(counts, mirrors, margin));
  write_json(dir / "margin.json",
             {{"eligible", margin.eligible}, {"excluded", margin.excluded}, {"pending", margin.pending},
              {"github_checked", github_enabled}});
  return {{"repos", snapshots.size()},
          {"targets", counts_json},
          {"mirror_groups", mirrors.groups.size()},
          {"eligible", margin.eligible.size()},
          {"excluded", margin.excluded.size()},
          {"pending", margin.pending.size()}};
}

// --- label ------------------------------------------------------------------------

json Pipeline::label() {
  const auto& cfg = config_.section("label");
  label::DomainList domains;
  if (const auto p = config_.path("label", "domains_file")) domains = label::DomainList::load(*p);
  std::optional<label::CsvGeoDatabase> geo;
  if (const auto p = config_.path("label", "geo_db")) geo = label::CsvGeoDatabase::load(*p);
  auto denylist = label::default_email_denylist();
  for (const auto& e : cfg.at("extra_denylist")) denylist.insert(text::to_lower(e.get<std::string>()));
  const auto threshold = cfg.at("threshold").get<double>();
  std::map<std::string, std::string> fixed;
  for (const auto& [k, v] : cfg.at("static_hosts").items()) fixed[text::to_lower(k)] = v.get<std::string>();
  const MappedResolver default_resolver(fixed);
  const label::Resolver& resolver = services_.resolver ? *services_.resolver : default_resolver;

  std::map<HostKey, std::pair<std::set<std::string>, std::size_t>> by_host;
  for (const auto& e : read_index(store_)) {
    if (e.corpus != kReference) continue;
    const auto x = git::read_extraction(store_.stage_dir(Stage::Extract) / e.file);
    auto& [emails, repos] = by_host[e.host];
    for (const auto& c : x.commits) emails.insert(c.author_email);
    ++repos;
  }

  std::vector<label::HostProfile> profiles;
  std::vector<json> lines;
  std::size_t academic_hosts = 0;
  for (const auto& [host, data] : by_host) {
    label::HostProfile p;
    p.host = host;
    p.unique_emails = label::filter_fake_emails(data.first, denylist);
    const auto l = label::label_host(p.unique_emails, domains, threshold);
    p.academic_email_fraction = l.academic_email_fraction;
    p.is_academic = l.is_academic;
    p.repo_count = data.second;
    if (geo) {
      if (const auto loc = label::geolocate(host, *geo, resolver)) {
        p.country = loc->country;
        p.region = loc->continent;
      }
    }
    academic_hosts += p.is_academic ? 1 : 0;
    json j = p;
    std::vector<std::string> academic;
    for (const auto& e : p.unique_emails)
      if (label::is_academic_email(e, domains)) academic.push_back(e);
    j["academic_emails"] = academic;
    lines.push_back(std::move(j));
    profiles.push_back(std::move(p));
  }
  const auto census = label::cross_host_emails(profiles);
  jsonl::write_all(store_.stage_dir(Stage::Label) / "hosts.jsonl", lines);
  json hist = json::object();
  for (const auto& [hosts, n] : census.hosts_per_email) hist[std::to_string(hosts)] = n;
  write_json(store_.stage_dir(Stage::Label) / "email_census.json", {{"emails", census.emails},
                                                                    {"hosts_per_email", hist},
                                                                    {"multi_host", census.multi_host},
                                                                    {"multi_country", census.multi_country},
                                                                    {"multi_continent", census.multi_continent}});
  return {{"hosts", profiles.size()},
          {"academic_hosts", academic_hosts},
          {"emails", census.emails},
          {"multi_host_emails", census.multi_host.size()}};
}

// --- stats ------------------------------------------------------------------------

json Pipeline::stats() {
  const auto& cfg = config_.section("stats");
  const auto dir = store_.stage_dir(Stage::Stats);
  auto all = read_metrics(store_);
  const auto margin = read_json(store_.stage_dir(Stage::Dedup) / "margin.json");
  const auto eligible_list = margin.at("eligible").get<std::vector<std::string>>();
  const std::set<std::string> eligible(eligible_list.begin(), eligible_list.end());
  std::erase_if(all.reference, [&](const metrics::RepoMetrics& m) { return !eligible.contains(m.repo_id); });

  const auto rows = report::compare_corpora(all.reference, all.comparison);
  write_json(dir / "comparison.json", report::comparison_json(rows, {kReference, kComparison}));

  std::vector<stats::LabeledMetrics> labeled;
  for (const auto& m : all.reference) labeled.push_back({m, kReference});
  for (const auto& m : all.comparison) labeled.push_back({m, kComparison});
  stats::LogisticOptions lopt;
  lopt.tol = cfg.at("tolerance").get<double>();
  lopt.max_iter = cfg.at("max_iterations").get<int>();
  std::vector<report::ModelResult> models;
  std::string baseline = cfg.at("baseline_language").get<std::string>();
  std::vector<std::string> levels;
  for (const bool with_language : {true, false}) {
    report::ModelResult m{with_language ? "Model 1" : "Model 2", std::string()};
    try {
      stats::DesignOptions dopt;
      dopt.include_language = with_language;
      dopt.rare_threshold = cfg.at("rare_language_threshold").get<std::size_t>();
      dopt.reference_corpus = kReference;
      dopt.baseline = cfg.at("baseline_language").get<std::string>();
      const auto dm = stats::build_design_matrix(labeled, dopt);
      if (with_language) {
        baseline = dm.baseline;
        levels = dm.language_levels;
      }
      m.fit = stats::logistic_fit(dm, lopt);
    } catch (const std::exception& e) {
      m.fit = std::string(e.what());
    }
    models.push_back(std::move(m));
  }
  write_json(dir / "logistic.json", report::logistic_json(models, baseline, levels));
  json fitted = json::object();
  for (const auto& m : models) fitted[m.name] = std::holds_alternative<stats::LogisticFit>(m.fit);
  return {{"reference_rows", all.reference.size()},
          {"comparison_rows", all.comparison.size()},
          {"models_fitted", fitted}};
}

// --- report -----------------------------------------------------------------------

json Pipeline::report() {
  const auto& cfg = config_.section("report");
  const auto dir = store_.stage_dir(Stage::Report);
  const report::Labels labels{cfg.at("reference_label").get<std::string>(),
                              cfg.at("comparison_label").get<std::string>()};
  auto all = read_metrics(store_);
  const auto margin = read_json(store_.stage_dir(Stage::Dedup) / "margin.json");
  const auto eligible_list = margin.at("eligible").get<std::vector<std::string>>();
  const std::set<std::string> eligible(eligible_list.begin(), eligible_list.end());
  std::erase_if(all.reference, [&](const metrics::RepoMetrics& m) { return !eligible.contains(m.repo_id); });
  const std::string zero_notice =
      "NOTICE: no analysis-eligible " + labels.reference +
      " repositories remain after overlap filtering (0 rows); statistics below are empty.\n\n";
  const bool zero_rows = all.reference.empty();

  // (a) corpus comparison
  const auto rows = report::compare_corpora(all.reference, all.comparison);
  auto cmp = report::comparison_json(rows, labels);
  cmp["zero_rows"] = zero_rows;
  write_json(dir / "comparison.json", cmp);
  write_text(dir / "comparison.txt", (zero_rows ? zero_notice : "") + report::comparison_text(rows, labels));

  // (b) geography
  std::vector<label::HostProfile> hosts;
  std::set<std::string> academic;
  for (const auto& j : jsonl::read_all(store_.stage_dir(Stage::Label) / "hosts.jsonl")) {
    hosts.push_back(j.get<label::HostProfile>());
    for (const auto& e : j.value("academic_emails", std::vector<std::string>{})) academic.insert(e);
  }
  std::map<std::string, double> populations;
  if (const auto p = config_.path("report", "population_file")) populations = report::load_populations(*p);
  const auto geo = report::geographic_table(
      hosts, [&](const std::string& e) { return academic.contains(e); }, populations);
  write_json(dir / "geography.json", report::geographic_json(geo));
  write_text(dir / "geography.txt", report::geographic_text(geo));

  // (c) overlap census
  const auto census = read_json(store_.stage_dir(Stage::Dedup) / "census.json");
  std::map<std::string, report::OverlapCounts> counts;
  for (const auto& [t, c] : census.at("targets").items())
    counts[t] = {c.at("checked").get<std::size_t>(), c.at("novel").get<std::size_t>(),
                 c.at("duplicate_complete").get<std::size_t>(), c.at("diverged").get<std::size_t>(),
                 c.at("pending").get<std::size_t>()};
  dedup::MirrorCensus mirrors;
  const auto& ic = census.at("intra_corpus");
  mirrors.repos = ic.at("repos").get<std::size_t>();
  mirrors.grouped = ic.at("grouped").get<std::size_t>();
  mirrors.mirrors = ic.at("mirrors").get<std::size_t>();
  mirrors.diverged = ic.at("diverged").get<std::size_t>();
  for (const auto& g : ic.at("group_list"))
    mirrors.groups.push_back({g.at("first_hash").get<std::string>(), g.at("members").get<std::vector<std::string>>(),
                              g.at("mirrors").get<std::vector<std::string>>(),
                              g.at("diverged").get<std::vector<std::string>>()});
  dedup::MarginSplit split{eligible_list, margin.at("excluded").get<std::vector<std::string>>(),
                           margin.at("pending").get<std::vector<std::string>>()};
  auto overlap = report::overlap_json(counts, mirrors, split);
  // Repo ids carry host ports and hashes carry commit times; the report keeps
  // only group shapes. dedup/census.json has the full listing.
  json shapes = json::array();
  for (const auto& g : mirrors.groups)
    shapes.push_back({{"members", g.members.size()}, {"mirrors", g.mirrors.size()}, {"diverged", g.diverged.size()}});
  overlap["intra_corpus"]["group_list"] = shapes;
  write_json(dir / "overlap.json", overlap);
  write_text(dir / "overlap.txt", report::overlap_text(counts, mirrors, split));

  // (d) logistic models
  const auto lj = read_json(store_.stage_dir(Stage::Stats) / "logistic.json");
  std::vector<report::ModelResult> models;
  for (const auto& m : lj.at("models")) models.push_back(report::fit_from_json(m));
  const auto baseline = lj.at("baseline_language").get<std::string>();
  const auto levels = lj.at("language_levels").get<std::vector<std::string>>();
  auto lout = report::logistic_json(models, baseline, levels);
  lout["zero_rows"] = zero_rows;
  write_json(dir / "logistic.json", lout);
  write_text(dir / "logistic.txt", (zero_rows ? zero_notice : "") + report::logistic_text(models, baseline, levels));

  // distributions for plotting
  std::size_t files = 0;
  for (const auto& m : report::comparison_metrics()) {
    write_text(dir / "distributions" / (std::string(kReference) + "_" + m.key + ".csv"),
               report::distribution_csv(report::metric_values(m, all.reference)));
    write_text(dir / "distributions" / (std::string(kComparison) + "_" + m.key + ".csv"),
               report::distribution_csv(report::metric_values(m, all.comparison)));
    files += 2;
  }
  return {{"zero_rows", zero_rows}, {"distribution_files", files}, {"regions", geo.size()}};
}

}  // namespace forgescope
