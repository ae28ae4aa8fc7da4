#include "forgescope/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "forgescope/errors.hpp"
#include "forgescope/text.hpp"

namespace forgescope::report {

using nlohmann::json;

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
      width[i] = std::max(width[i], text::utf8_length(r[i]));
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  auto line = [&](const std::vector<std::string>& r) {
    std::string out;
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      const auto pad = std::string(width[i] - text::utf8_length(cell), ' ');
      if (i > 0) out += "  ";
      out += i == 0 ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string fixed(double v, int decimals) {
  auto s = fmt::format("{:.{}f}", v, decimals);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.00"
  return s;
}

std::string format_p(double p) { return p < 0.001 ? "<0.001" : fixed(p, 3); }

namespace {

std::optional<double> u64(std::uint64_t v) { return static_cast<double>(v); }

json summary_json(const std::optional<stats::SummaryStats>& s) {
  if (!s) return nullptr;
  return {{"n", s->n}, {"mean", s->mean}, {"median", s->median}, {"p5", s->p5}, {"p95", s->p95}};
}

std::string ci_cell(const stats::SummaryStats& s) { return "[" + fixed(s.p5, 2) + "," + fixed(s.p95, 2) + "]"; }

}  // namespace

const std::vector<ComparisonMetric>& comparison_metrics() {
  using M = metrics::RepoMetrics;
  static const std::vector<ComparisonMetric> list{
      {"files", "Files", [](const M& m) { return u64(m.files); }},
      {"committers", "Committers", [](const M& m) { return u64(m.committers); }},
      {"avg_message_length", "Message Lengths", [](const M& m) { return std::optional(m.avg_message_length); }},
      {"avg_editors_per_file", "Editor Density", [](const M& m) { return m.avg_editors_per_file; }},
      {"burstiness", "Burstiness", [](const M& m) { return std::optional(m.burstiness); }},
      {"commits", "Commits", [](const M& m) { return u64(m.commits); }},
      {"branches", "Branches", [](const M& m) { return u64(m.branches); }},
      {"age_hours", "Age (hours)", [](const M& m) { return std::optional(m.age_hours); }},
      {"age_per_commit_hours", "Age / Commits",
       [](const M& m) { return std::optional(m.age_hours / static_cast<double>(m.commits)); }},
      {"mean_interevent_hours", "Avg. Interevent", [](const M& m) { return m.mean_interevent_hours; }},
      {"effective_team_size", "Team Size", [](const M& m) { return std::optional(m.effective_team_size); }},
  };
  return list;
}

std::vector<double> metric_values(const ComparisonMetric& metric, std::span<const metrics::RepoMetrics> rows) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (const auto v = metric.value(r); v && std::isfinite(*v)) out.push_back(*v);
  return out;
}

std::vector<ComparisonRow> compare_corpora(std::span<const metrics::RepoMetrics> reference,
                                           std::span<const metrics::RepoMetrics> comparison) {
  std::vector<ComparisonRow> rows;
  for (const auto& m : comparison_metrics()) {
    ComparisonRow row{m.key, m.label, std::nullopt, std::nullopt, std::nullopt};
    const auto a = metric_values(m, reference);
    const auto b = metric_values(m, comparison);
    if (!a.empty()) row.reference = stats::summarize(a);
    if (!b.empty()) row.comparison = stats::summarize(b);
    if (!a.empty() && !b.empty()) row.ks = stats::ks_two_sample(a, b);
    rows.push_back(std::move(row));
  }
  return rows;
}

json comparison_json(std::span<const ComparisonRow> rows, const Labels& labels) {
  json out = {{"reference", labels.reference}, {"comparison", labels.comparison}, {"rows", json::array()}};
  for (const auto& r : rows) {
    out["rows"].push_back({{"metric", r.key},
                           {"label", r.label},
                           {"reference", summary_json(r.reference)},
                           {"comparison", summary_json(r.comparison)},
                           {"ks", r.ks ? json{{"statistic", r.ks->statistic}, {"p_value", r.ks->p_value}} : json(nullptr)}});
  }
  return out;
}

std::string comparison_text(std::span<const ComparisonRow> rows, const Labels& labels) {
  const std::vector<std::string> header{"Statistic",
                                        labels.reference + " Mean",
                                        "Median",
                                        "CI",
                                        labels.comparison + " Mean",
                                        "Median",
                                        "CI",
                                        "KS S",
                                        "KS P"};
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.label};
    for (const auto* s : {&r.reference, &r.comparison}) {
      if (*s) {
        cells.push_back(fixed((*s)->mean, 2));
        cells.push_back(fixed((*s)->median, 2));
        cells.push_back(ci_cell(**s));
      } else {
        cells.insert(cells.end(), {"n/a", "n/a", "n/a"});
      }
    }
    cells.push_back(r.ks ? fixed(r.ks->statistic, 2) : "n/a");
    cells.push_back(r.ks ? format_p(r.ks->p_value) : "n/a");
    body.push_back(std::move(cells));
  }
  return render_table(header, body);
}

std::map<std::string, double> load_populations(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read population file " + file.string());
  std::map<std::string, double> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#' || t.starts_with("region")) continue;
    const auto fields = text::split(t, ',');
    try {
      if (fields.size() != 2) throw std::invalid_argument("field count");
      out[text::to_upper(text::trim(fields[0]))] = std::stod(std::string(text::trim(fields[1])));
    } catch (const std::exception&) {
      throw ConfigError(file.string() + ":" + std::to_string(n) + ": expected region,population");
    }
  }
  return out;
}

std::vector<GeoRow> geographic_table(std::span<const label::HostProfile> hosts,
                                     const std::function<bool(const std::string&)>& is_academic,
                                     const std::map<std::string, double>& populations) {
  struct Acc {
    std::size_t hosts = 0;
    std::size_t repos = 0;
    std::set<std::string> users;
  };
  std::map<std::string, Acc> by_region;
  std::set<std::string> all_users;
  for (const auto& h : hosts) {
    auto& acc = by_region[h.region.value_or("unknown")];
    ++acc.hosts;
    acc.repos += h.repo_count;
    acc.users.insert(h.unique_emails.begin(), h.unique_emails.end());
    all_users.insert(h.unique_emails.begin(), h.unique_emails.end());
  }
  std::vector<GeoRow> rows;
  for (const auto& [region, acc] : by_region) {
    GeoRow r;
    r.region = region;
    r.hosts = acc.hosts;
    r.repos = acc.repos;
    r.users = acc.users.size();
    r.academic_users = static_cast<std::size_t>(std::count_if(
        acc.users.begin(), acc.users.end(), is_academic));
    r.host_pct = hosts.empty() ? 0.0 : 100.0 * static_cast<double>(r.hosts) / static_cast<double>(hosts.size());
    r.user_pct = all_users.empty() ? 0.0 : 100.0 * static_cast<double>(r.users) / static_cast<double>(all_users.size());
    r.academic_pct = r.users == 0 ? 0.0 : 100.0 * static_cast<double>(r.academic_users) / static_cast<double>(r.users);
    if (const auto it = populations.find(region); it != populations.end() && it->second > 0)
      r.per_capita = static_cast<double>(r.repos) / it->second;
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const GeoRow& a, const GeoRow& b) {
    if ((a.region == "unknown") != (b.region == "unknown")) return b.region == "unknown";
    return a.hosts > b.hosts;
  });
  return rows;
}

json geographic_json(std::span<const GeoRow> rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"region", r.region},
                   {"hosts", r.hosts},
                   {"host_pct", r.host_pct},
                   {"users", r.users},
                   {"user_pct", r.user_pct},
                   {"repos", r.repos},
                   {"repos_per_capita", r.per_capita ? json(*r.per_capita) : json(nullptr)},
                   {"academic_users", r.academic_users},
                   {"academic_email_pct", r.academic_pct}});
  return {{"rows", out}};
}

std::string geographic_text(std::span<const GeoRow> rows) {
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    std::string repos = std::to_string(r.repos);
    if (r.per_capita) repos += " (" + fmt::format("{:.2e}", *r.per_capita) + ")";
    body.push_back({r.region, fixed(r.host_pct, 2), fixed(r.user_pct, 2), repos, fixed(r.academic_pct, 2)});
  }
  return render_table({"Region", "% Hosts", "% Users", "Repositories (per capita)", "% Academic emails"}, body);
}

json overlap_json(const std::map<std::string, OverlapCounts>& by_target, const dedup::MirrorCensus& mirrors,
                  const dedup::MarginSplit& margin) {
  json targets = json::object();
  for (const auto& [t, c] : by_target)
    targets[t] = {{"checked", c.checked},
                  {"novel", c.novel},
                  {"duplicate_complete", c.duplicate_complete},
                  {"diverged", c.diverged},
                  {"pending", c.pending}};
  json groups = json::array();
  for (const auto& g : mirrors.groups)
    groups.push_back({{"first_hash", g.first_hash},
                      {"members", g.members},
                      {"mirrors", g.mirrors},
                      {"diverged", g.diverged}});
  return {{"targets", targets},
          {"intra_corpus",
           {{"repos", mirrors.repos},
            {"groups", mirrors.groups.size()},
            {"grouped", mirrors.grouped},
            {"mirrors", mirrors.mirrors},
            {"diverged", mirrors.diverged},
            {"group_list", groups}}},
          {"margin",
           {{"eligible", margin.eligible.size()},
            {"excluded", margin.excluded.size()},
            {"pending", margin.pending.size()}}}};
}

std::string overlap_text(const std::map<std::string, OverlapCounts>& by_target, const dedup::MirrorCensus& mirrors,
                         const dedup::MarginSplit& margin) {
  std::vector<std::vector<std::string>> body;
  for (const auto& [t, c] : by_target)
    body.push_back({t, std::to_string(c.checked), std::to_string(c.duplicate_complete + c.diverged),
                    std::to_string(c.diverged), std::to_string(c.novel), std::to_string(c.pending)});
  body.push_back({std::string(dedup::kIntraCorpus), std::to_string(mirrors.repos), std::to_string(mirrors.grouped),
                  std::to_string(mirrors.diverged), std::to_string(mirrors.repos - mirrors.grouped), "0"});
  auto out = render_table({"Target", "Checked", "First hash found", "Diverged", "Novel", "Pending"}, body);
  out += "\nMirror groups: " + std::to_string(mirrors.groups.size()) + " (" + std::to_string(mirrors.mirrors) +
         " mirrors, " + std::to_string(mirrors.diverged) + " diverged)\n";
  out += "Analysis-eligible: " + std::to_string(margin.eligible.size()) + ", excluded: " +
         std::to_string(margin.excluded.size()) + ", pending: " + std::to_string(margin.pending.size()) + "\n";
  return out;
}

json fit_json(const ModelResult& m) {
  if (const auto* err = std::get_if<std::string>(&m.fit)) return {{"model", m.name}, {"error", *err}};
  const auto& f = std::get<stats::LogisticFit>(m.fit);
  json coefs = json::array();
  for (const auto& c : f.coefficients)
    coefs.push_back({{"name", c.name},
                     {"beta", c.beta},
                     {"se", c.se},
                     {"odds", c.odds},
                     {"p_value", c.p_value},
                     {"ci_low", c.ci_low},
                     {"ci_high", c.ci_high}});
  return {{"model", m.name},
          {"n", f.n},
          {"coefficients", coefs},
          {"deviance", f.deviance},
          {"null_deviance", f.null_deviance},
          {"pseudo_r2", f.pseudo_r2},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"deviance_trace", f.deviance_trace}};
}

ModelResult fit_from_json(const json& j) {
  ModelResult m;
  m.name = j.at("model").get<std::string>();
  if (j.contains("error")) {
    m.fit = j["error"].get<std::string>();
    return m;
  }
  stats::LogisticFit f;
  f.n = j.at("n").get<std::size_t>();
  for (const auto& c : j.at("coefficients"))
    f.coefficients.push_back({c.at("name").get<std::string>(), c.at("beta").get<double>(), c.at("se").get<double>(),
                              c.at("odds").get<double>(), c.at("p_value").get<double>(),
                              c.at("ci_low").get<double>(), c.at("ci_high").get<double>()});
  f.deviance = j.at("deviance").get<double>();
  f.null_deviance = j.at("null_deviance").get<double>();
  f.pseudo_r2 = j.at("pseudo_r2").get<double>();
  f.iterations = j.at("iterations").get<int>();
  f.converged = j.at("converged").get<bool>();
  f.deviance_trace = j.at("deviance_trace").get<std::vector<double>>();
  m.fit = std::move(f);
  return m;
}

namespace {

const stats::Coefficient* find_coef(const ModelResult& m, const std::string& name) {
  const auto* f = std::get_if<stats::LogisticFit>(&m.fit);
  if (f == nullptr) return nullptr;
  for (const auto& c : f->coefficients)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

std::string logistic_text(std::span<const ModelResult> models, const std::string& baseline,
                          std::span<const std::string> language_levels) {
  std::vector<std::string> header{""};
  for (const auto& m : models) header.insert(header.end(), {m.name + " e^b", "p", "CI"});
  std::vector<std::vector<std::string>> body;
  auto coef_row = [&](const std::string& label, const std::string& name) {
    std::vector<std::string> row{label};
    for (const auto& m : models) {
      if (const auto* c = find_coef(m, name))
        row.insert(row.end(), {fixed(c->odds, 3), format_p(c->p_value),
                               "[" + fixed(c->ci_low, 3) + "," + fixed(c->ci_high, 3) + "]"});
      else
        row.insert(row.end(), {"", "", ""});
    }
    body.push_back(std::move(row));
  };
  coef_row("Constant", "Constant");
  if (!language_levels.empty()) {
    body.push_back({"Language (vs. " + baseline + ")"});
    for (const auto& l : language_levels) coef_row("   " + l, l);
  }
  for (const auto& f : stats::regression_features()) coef_row(f.label, f.label);
  std::vector<std::string> dev{"-2LL"};
  std::vector<std::string> r2{"Pseudo-R2"};
  for (const auto& m : models) {
    const auto* f = std::get_if<stats::LogisticFit>(&m.fit);
    dev.insert(dev.end(), {f ? fixed(f->deviance, 3) : "", "", ""});
    r2.insert(r2.end(), {f ? fixed(f->pseudo_r2, 3) : "", "", ""});
  }
  body.push_back(std::move(dev));
  body.push_back(std::move(r2));
  auto out = render_table(header, body);
  for (const auto& m : models)
    if (const auto* err = std::get_if<std::string>(&m.fit)) out += m.name + " not estimable: " + *err + "\n";
  return out;
}

json logistic_json(std::span<const ModelResult> models, const std::string& baseline,
                   std::span<const std::string> language_levels) {
  json ms = json::array();
  for (const auto& m : models) ms.push_back(fit_json(m));
  return {{"baseline_language", baseline},
          {"language_levels", std::vector<std::string>(language_levels.begin(), language_levels.end())},
          {"models", ms}};
}

std::string distribution_csv(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::string out = "value\n";
  for (double v : values) out += metrics::format_double(v) + "\n";
  return out;
}

}  // namespace forgescope::report
