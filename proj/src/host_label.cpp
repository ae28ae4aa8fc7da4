#include "forgescope/host_label.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>

#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"
#include "forgescope/text.hpp"

namespace forgescope::label {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view domain_of(std::string_view email) {
  const auto at = email.rfind('@');
  return at == std::string_view::npos ? std::string_view{} : email.substr(at + 1);
}

std::string normalize_domain(std::string_view d) {
  auto s = text::to_lower(text::trim(d));
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

DomainList::DomainList(std::set<std::string> domains) {
  for (const auto& d : domains) {
    auto n = normalize_domain(d);
    if (!n.empty()) domains_.insert(std::move(n));
  }
}

DomainList DomainList::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read domain list " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto content = buf.str();
  std::set<std::string> domains;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (content[first] == '[' || content[first] == '{')) {
    json doc;
    try {
      doc = json::parse(content);
    } catch (const json::parse_error& e) {
      throw ConfigError("domain list " + path.string() + ": " + e.what());
    }
    auto take = [&](const json& entry) {
      if (entry.is_string()) domains.insert(entry.get<std::string>());
      else if (entry.is_object() && entry.contains("domains"))
        for (const auto& d : entry["domains"]) domains.insert(d.get<std::string>());
    };
    if (doc.is_array()) for (const auto& e : doc) take(e);
    else take(doc);
  } else {
    for (auto line : text::split(content, '\n')) {
      line = text::trim(line);
      if (line.empty() || line.front() == '#') continue;
      domains.emplace(line);
    }
  }
  return DomainList(std::move(domains));
}

bool DomainList::matches(std::string_view domain) const {
  auto d = normalize_domain(domain);
  while (!d.empty()) {
    if (domains_.contains(d)) return true;
    const auto dot = d.find('.');
    if (dot == std::string::npos) break;
    d.erase(0, dot + 1);
  }
  return false;
}

const std::set<std::string>& default_email_denylist() {
  static const std::set<std::string> list{
      "anonymous@overleaf.com", "noreply@github.com",    "git@localhost",       "none@none",
      "nobody@nowhere",         "noreply@gitlab.com",    "gitlab@localhost",    "gitea@localhost",
      "you@example.com",        "your@email.com",        "email@example.com",   "user@example.com",
      "admin@example.com",      "noreply@overleaf.com",  "root@localhost",      "action@github.com",
  };
  return list;
}

bool is_fake_email(std::string_view email, const std::set<std::string>& denylist) {
  const auto e = text::to_lower(text::trim(email));
  const auto at = e.rfind('@');
  if (at == std::string::npos || at == 0) return true;
  const auto domain = std::string_view(e).substr(at + 1);
  const auto dot = domain.find('.');
  if (dot == std::string_view::npos || dot == 0 || domain.back() == '.') return true;
  if (domain == "example.com" || domain == "example.org" || domain == "example.net") return true;
  return denylist.contains(e);
}

std::set<std::string> filter_fake_emails(const std::set<std::string>& emails, const std::set<std::string>& denylist) {
  std::set<std::string> out;
  for (const auto& e : emails)
    if (!is_fake_email(e, denylist)) out.insert(e);
  return out;
}

bool is_academic_email(std::string_view email, const DomainList& list) {
  const auto domain = normalize_domain(domain_of(email));
  if (domain.empty()) return false;
  if (domain.ends_with(".edu") || domain == "edu") return true;
  return list.matches(domain);
}

HostLabel label_host(const std::set<std::string>& emails, const DomainList& list, double threshold) {
  HostLabel label;
  if (emails.empty()) return label;
  const auto academic = std::count_if(emails.begin(), emails.end(),
                                      [&](const std::string& e) { return is_academic_email(e, list); });
  label.academic_email_fraction = static_cast<double>(academic) / static_cast<double>(emails.size());
  label.is_academic = label.academic_email_fraction > threshold;
  return label;
}

namespace {

struct ParsedIp {
  bool v6 = false;
  std::array<std::uint8_t, 16> bytes{};
};

std::optional<ParsedIp> parse_ip(std::string_view s) {
  std::string str(s);
  if (str.size() > 2 && str.front() == '[' && str.back() == ']') str = str.substr(1, str.size() - 2);
  ParsedIp ip;
  if (inet_pton(AF_INET, str.c_str(), ip.bytes.data()) == 1) return ip;
  ip.v6 = true;
  if (inet_pton(AF_INET6, str.c_str(), ip.bytes.data()) == 1) {
    // IPv4-mapped addresses are looked up as IPv4.
    static constexpr std::uint8_t kMapped[12] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff};
    if (std::memcmp(ip.bytes.data(), kMapped, 12) == 0) {
      ParsedIp v4;
      std::copy_n(ip.bytes.begin() + 12, 4, v4.bytes.begin());
      return v4;
    }
    return ip;
  }
  return std::nullopt;
}

bool prefix_match(const std::array<std::uint8_t, 16>& a, const std::array<std::uint8_t, 16>& b, int bits) {
  int i = 0;
  for (; bits >= 8; bits -= 8, ++i)
    if (a[i] != b[i]) return false;
  if (bits == 0) return true;
  const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
  return (a[i] & mask) == (b[i] & mask);
}

}  // namespace

bool is_ip_literal(std::string_view s) { return parse_ip(s).has_value(); }

void CsvGeoDatabase::add(std::string_view cidr, GeoLocation location) {
  const auto slash = cidr.find('/');
  const auto ip = parse_ip(cidr.substr(0, slash));
  if (!ip) throw ConfigError("bad network: " + std::string(cidr));
  const int max_bits = ip->v6 ? 128 : 32;
  int prefix = max_bits;
  if (slash != std::string_view::npos) {
    try {
      prefix = std::stoi(std::string(cidr.substr(slash + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad prefix length: " + std::string(cidr));
    }
  }
  if (prefix < 0 || prefix > max_bits) throw ConfigError("bad prefix length: " + std::string(cidr));
  networks_.push_back({ip->v6, ip->bytes, prefix, std::move(location)});
}

CsvGeoDatabase CsvGeoDatabase::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read geo database " + path.string());
  CsvGeoDatabase db;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#' || t.starts_with("network")) continue;
    const auto fields = text::split(t, ',');
    if (fields.size() < 3)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected network,country,continent");
    db.add(text::trim(fields[0]),
           {text::to_upper(text::trim(fields[1])), text::to_upper(text::trim(fields[2]))});
  }
  return db;
}

std::optional<GeoLocation> CsvGeoDatabase::lookup(std::string_view ip_text) const {
  const auto ip = parse_ip(ip_text);
  if (!ip) return std::nullopt;
  const Network* best = nullptr;
  for (const auto& n : networks_) {
    if (n.v6 != ip->v6 || !prefix_match(n.bytes, ip->bytes, n.prefix)) continue;
    if (best == nullptr || n.prefix > best->prefix) best = &n;
  }
  if (best == nullptr) return std::nullopt;
  return best->location;
}

std::vector<std::string> SystemResolver::resolve(const std::string& hostname) const {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(hostname.c_str(), nullptr, &hints, &res) != 0) return {};
  std::vector<std::string> out;
  for (auto* p = res; p != nullptr; p = p->ai_next) {
    char buf[INET6_ADDRSTRLEN] = {};
    const void* addr = p->ai_family == AF_INET
                           ? static_cast<const void*>(&reinterpret_cast<sockaddr_in*>(p->ai_addr)->sin_addr)
                           : static_cast<const void*>(&reinterpret_cast<sockaddr_in6*>(p->ai_addr)->sin6_addr);
    if (inet_ntop(p->ai_family, addr, buf, sizeof buf) != nullptr &&
        std::find(out.begin(), out.end(), buf) == out.end())
      out.emplace_back(buf);
  }
  freeaddrinfo(res);
  return out;
}

std::optional<GeoLocation> geolocate(const HostKey& host, const GeoProvider& geo, const Resolver& resolver) {
  if (is_ip_literal(host.address)) return geo.lookup(host.address);
  for (const auto& addr : resolver.resolve(host.address))
    if (auto loc = geo.lookup(addr)) return loc;
  return std::nullopt;
}

void to_json(json& j, const HostProfile& p) {
  j = json{{"host", p.host},
           {"unique_emails", p.unique_emails},
           {"academic_email_fraction", p.academic_email_fraction},
           {"is_academic", p.is_academic},
           {"region", p.region ? json(*p.region) : json(nullptr)},
           {"country", p.country ? json(*p.country) : json(nullptr)},
           {"repo_count", p.repo_count}};
}

void from_json(const json& j, HostProfile& p) {
  p.host = j.at("host").get<HostKey>();
  p.unique_emails = j.at("unique_emails").get<std::set<std::string>>();
  p.academic_email_fraction = j.at("academic_email_fraction").get<double>();
  p.is_academic = j.at("is_academic").get<bool>();
  p.region = j.contains("region") && !j["region"].is_null() ? std::optional(j["region"].get<std::string>())
                                                              : std::nullopt;
  p.country = j.contains("country") && !j["country"].is_null() ? std::optional(j["country"].get<std::string>())
                                                                 : std::nullopt;
  p.repo_count = j.at("repo_count").get<std::size_t>();
}

EmailCensus cross_host_emails(std::span<const HostProfile> profiles) {
  struct Seen {
    std::set<HostKey> hosts;
    std::set<std::string> countries;
    std::set<std::string> continents;
  };
  std::map<std::string, Seen> by_email;
  for (const auto& p : profiles) {
    for (const auto& e : p.unique_emails) {
      auto& s = by_email[e];
      s.hosts.insert(p.host);
      if (p.country) s.countries.insert(*p.country);
      if (p.region) s.continents.insert(*p.region);
    }
  }
  EmailCensus census;
  census.emails = by_email.size();
  for (const auto& [email, s] : by_email) {
    ++census.hosts_per_email[s.hosts.size()];
    if (s.hosts.size() >= 2) census.multi_host.push_back(email);
    if (s.countries.size() >= 2) census.multi_country.push_back(email);
    if (s.continents.size() >= 2) census.multi_continent.push_back(email);
  }
  return census;
}

}  // namespace forgescope::label
