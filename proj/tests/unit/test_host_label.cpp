#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "forgescope/errors.hpp"
#include "forgescope/host_label.hpp"
#include "git_fixture.hpp"

using namespace forgescope;
using namespace forgescope::label;
namespace fx = fixture;

namespace {

class FixedResolver : public Resolver {
 public:
  std::map<std::string, std::vector<std::string>> answers;
  std::vector<std::string> resolve(const std::string& h) const override {
    const auto it = answers.find(h);
    return it == answers.end() ? std::vector<std::string>{} : it->second;
  }
};

HostProfile profile(const std::string& host, std::set<std::string> emails, std::optional<std::string> country,
                    std::optional<std::string> region) {
  HostProfile p;
  p.host = {host, 443, http::Scheme::Https};
  p.unique_emails = std::move(emails);
  p.country = std::move(country);
  p.region = std::move(region);
  return p;
}

}  // namespace

TEST(Academic, ExactlyHalfIsNotAcademic) {
  const DomainList list({"uni-example.de"});
  const std::set<std::string> half{"a@cs.uni-example.de", "b@gmail.com"};
  const auto l = label_host(half, list);
  EXPECT_DOUBLE_EQ(l.academic_email_fraction, 0.5);
  EXPECT_FALSE(l.is_academic);
  const std::set<std::string> most{"a@cs.uni-example.de", "c@mit.edu", "b@gmail.com"};
  EXPECT_TRUE(label_host(most, list).is_academic);
  EXPECT_FALSE(label_host({}, list).is_academic);
}

TEST(Academic, SuffixMatching) {
  const DomainList list({"ox.ac.uk"});
  EXPECT_TRUE(is_academic_email("x@ox.ac.uk", list));
  EXPECT_TRUE(is_academic_email("x@cs.OX.ac.uk", list));
  EXPECT_FALSE(is_academic_email("x@fox.ac.uk", list));
  EXPECT_TRUE(is_academic_email("x@stanford.edu", list));
  EXPECT_FALSE(is_academic_email("x@edu.example.com", list));
}

TEST(Academic, DomainListFormats) {
  fx::TempDir dir;
  fx::write_file(dir / "d.txt", "# comment\nuni-a.de\n\nUNI-B.fr\n");
  fx::write_file(dir / "d.json", R"([{"name":"U","domains":["u.ac.jp"]},"plain.edu.au"])");
  EXPECT_EQ(DomainList::load(dir / "d.txt").domains(), (std::set<std::string>{"uni-a.de", "uni-b.fr"}));
  EXPECT_EQ(DomainList::load(dir / "d.json").domains(), (std::set<std::string>{"u.ac.jp", "plain.edu.au"}));
}

TEST(FakeEmails, PlaceholderAddressesAreFiltered) {
  EXPECT_TRUE(is_fake_email("you@example.com"));
  EXPECT_TRUE(is_fake_email("root@localhost"));
  EXPECT_TRUE(is_fake_email("anonymous@overleaf.com"));
  EXPECT_TRUE(is_fake_email("noatsign"));
  EXPECT_FALSE(is_fake_email("alice@uni.edu"));
  const auto kept = filter_fake_emails({"you@example.com", "root@localhost", "bob@corp.com"});
  EXPECT_EQ(kept, (std::set<std::string>{"bob@corp.com"}));
}

TEST(Geo, LongestPrefixAndMappedAddresses) {
  CsvGeoDatabase db;
  db.add("10.0.0.0/8", {"US", "NA"});
  db.add("10.1.0.0/16", {"DE", "EU"});
  db.add("2001:db8::/32", {"JP", "AS"});
  EXPECT_EQ(db.lookup("10.2.3.4")->country, "US");
  EXPECT_EQ(db.lookup("10.1.3.4")->country, "DE");
  EXPECT_EQ(db.lookup("::ffff:10.1.0.1")->country, "DE");
  EXPECT_EQ(db.lookup("2001:db8::1")->continent, "AS");
  EXPECT_FALSE(db.lookup("192.168.0.1"));
  EXPECT_FALSE(db.lookup("not an ip"));
}

TEST(Geo, CsvLoadAndErrors) {
  fx::TempDir dir;
  fx::write_file(dir / "geo.csv", "network,country,continent\n127.0.0.0/8,DE,EU\n");
  EXPECT_EQ(CsvGeoDatabase::load(dir / "geo.csv").lookup("127.0.0.1")->continent, "EU");
  fx::write_file(dir / "bad.csv", "127.0.0.0/99,DE,EU\n");
  EXPECT_THROW(CsvGeoDatabase::load(dir / "bad.csv"), ConfigError);
  EXPECT_THROW(CsvGeoDatabase::load(dir / "missing.csv"), ConfigError);
}

TEST(Geo, HostnamesResolveThenLookup) {
  CsvGeoDatabase db;
  db.add("203.0.113.0/24", {"FR", "EU"});
  FixedResolver r;
  r.answers["forge.example"] = {"203.0.113.9"};
  EXPECT_EQ(geolocate({"forge.example", 443, http::Scheme::Https}, db, r)->country, "FR");
  EXPECT_EQ(geolocate({"203.0.113.1", 443, http::Scheme::Https}, db, r)->country, "FR");
  EXPECT_FALSE(geolocate({"nowhere.example", 443, http::Scheme::Https}, db, r));
  EXPECT_TRUE(is_ip_literal("::1"));
  EXPECT_FALSE(is_ip_literal("a.b"));
}

TEST(CrossHost, EmailCensus) {
  const std::vector<HostProfile> hosts{profile("a", {"x@u.edu", "y@c.com"}, "DE", "EU"),
                                       profile("b", {"x@u.edu"}, "FR", "EU"),
                                       profile("c", {"x@u.edu", "z@c.com"}, "US", "NA")};
  const auto c = cross_host_emails(hosts);
  EXPECT_EQ(c.emails, 3u);
  EXPECT_EQ(c.hosts_per_email.at(1), 2u);
  EXPECT_EQ(c.hosts_per_email.at(3), 1u);
  EXPECT_EQ(c.multi_host, (std::vector<std::string>{"x@u.edu"}));
  EXPECT_EQ(c.multi_country, (std::vector<std::string>{"x@u.edu"}));
  EXPECT_EQ(c.multi_continent, (std::vector<std::string>{"x@u.edu"}));
}

TEST(Profiles, JsonRoundTrip) {
  auto p = profile("h", {"a@b.edu"}, "DE", "EU");
  p.academic_email_fraction = 1.0;
  p.is_academic = true;
  p.repo_count = 4;
  const nlohmann::json j = p;
  const auto q = j.get<HostProfile>();
  EXPECT_EQ(q.host, p.host);
  EXPECT_EQ(q.unique_emails, p.unique_emails);
  EXPECT_EQ(q.region, p.region);
  EXPECT_EQ(q.repo_count, 4u);
}
