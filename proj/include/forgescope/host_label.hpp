#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forgescope/fingerprint.hpp"

namespace forgescope::label {

/// Registrable academic domains. Matching is by equality or subdomain.
class DomainList {
 public:
  DomainList() = default;
  explicit DomainList(std::set<std::string> domains);

  /// Newline-delimited text (blank lines and '#' comments ignored) or the
  /// community JSON format: an array of objects carrying a "domains" array.
  static DomainList load(const std::filesystem::path& path);

  bool matches(std::string_view domain) const;
  const std::set<std::string>& domains() const { return domains_; }

 private:
  std::set<std::string> domains_;
};

/// Addresses known to be automated or placeholders.
const std::set<std::string>& default_email_denylist();

bool is_fake_email(std::string_view email, const std::set<std::string>& denylist = default_email_denylist());

std::set<std::string> filter_fake_emails(const std::set<std::string>& emails,
                                         const std::set<std::string>& denylist = default_email_denylist());

/// Domain part of the address is listed (or a subdomain of a listed
/// domain) or ends in ".edu".
bool is_academic_email(std::string_view email, const DomainList& list);

struct HostLabel {
  double academic_email_fraction = 0.0;
  bool is_academic = false;
};

/// Strictly more than `threshold` of the unique emails must be academic.
HostLabel label_host(const std::set<std::string>& emails, const DomainList& list, double threshold = 0.5);

struct GeoLocation {
  std::string country;    // ISO 3166 alpha-2
  std::string continent;  // AF AN AS EU NA OC SA
  bool operator==(const GeoLocation&) const = default;
};

class GeoProvider {
 public:
  virtual ~GeoProvider() = default;
  virtual std::optional<GeoLocation> lookup(std::string_view ip) const = 0;
};

/// Local CIDR table with lines "network/prefix,country,continent". The most
/// specific matching network wins. A header line starting with "network" is
/// skipped.
class CsvGeoDatabase final : public GeoProvider {
 public:
  /// Throws ConfigError when the file is missing or malformed.
  static CsvGeoDatabase load(const std::filesystem::path& path);
  void add(std::string_view cidr, GeoLocation location);
  std::optional<GeoLocation> lookup(std::string_view ip) const override;

 private:
  struct Network {
    bool v6 = false;
    std::array<std::uint8_t, 16> bytes{};
    int prefix = 0;
    GeoLocation location;
  };
  std::vector<Network> networks_;
};

class Resolver {
 public:
  virtual ~Resolver() = default;
  virtual std::vector<std::string> resolve(const std::string& hostname) const = 0;
};

/// getaddrinfo-based resolver.
class SystemResolver final : public Resolver {
 public:
  std::vector<std::string> resolve(const std::string& hostname) const override;
};

bool is_ip_literal(std::string_view s);

/// IP literals are looked up directly; names are resolved first and the
/// first address with a database entry wins.
std::optional<GeoLocation> geolocate(const HostKey& host, const GeoProvider& geo, const Resolver& resolver);

struct HostProfile {
  HostKey host;
  std::set<std::string> unique_emails;  // after fake filtering
  double academic_email_fraction = 0.0;
  bool is_academic = false;
  std::optional<std::string> region;
  std::optional<std::string> country;
  std::size_t repo_count = 0;
};

void to_json(nlohmann::json& j, const HostProfile& p);
void from_json(const nlohmann::json& j, HostProfile& p);

struct EmailCensus {
  std::map<std::size_t, std::size_t> hosts_per_email;  // host count -> number of emails
  std::size_t emails = 0;
  std::vector<std::string> multi_host;
  std::vector<std::string> multi_country;
  std::vector<std::string> multi_continent;
};

EmailCensus cross_host_emails(std::span<const HostProfile> profiles);

}  // namespace forgescope::label
