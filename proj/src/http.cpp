#include "forgescope/http.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <stdexcept>

#include <arpa/inet.h>
#include <httplib.h>

#include "forgescope/text.hpp"

namespace forgescope::http {

std::string_view to_string(Scheme s) { return s == Scheme::Http ? "http" : "https"; }

Scheme scheme_from_string(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "http") return Scheme::Http;
  if (lower == "https") return Scheme::Https;
  throw std::invalid_argument("unsupported scheme: " + std::string(s));
}

std::uint16_t default_port(Scheme s) { return s == Scheme::Http ? 80 : 443; }

std::string_view to_string(TransportErrorKind k) {
  switch (k) {
    case TransportErrorKind::Timeout: return "timeout";
    case TransportErrorKind::ConnectionRefused: return "connection-refused";
    case TransportErrorKind::Tls: return "tls";
    case TransportErrorKind::Other: return "transport";
  }
  return "transport";
}

Url Url::parse(std::string_view text) {
  const auto sep = text.find("://");
  if (sep == std::string_view::npos) throw std::invalid_argument("not an absolute URL: " + std::string(text));
  Url url;
  url.scheme = scheme_from_string(text.substr(0, sep));
  std::string_view rest = text.substr(sep + 3);
  const auto path_pos = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, path_pos);
  std::string_view target = path_pos == std::string_view::npos ? std::string_view{} : rest.substr(path_pos);
  if (const auto hash = target.find('#'); hash != std::string_view::npos) target = target.substr(0, hash);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (authority.empty()) throw std::invalid_argument("URL without host: " + std::string(text));

  std::string_view port_text;
  if (authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) throw std::invalid_argument("bad IPv6 literal: " + std::string(text));
    url.host = std::string(authority.substr(1, close - 1));
    const auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') throw std::invalid_argument("bad authority: " + std::string(text));
      port_text = after.substr(1);
    }
  } else {
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
      url.host = std::string(authority.substr(0, colon));
      port_text = authority.substr(colon + 1);
    } else {
      url.host = std::string(authority);
    }
  }
  if (url.host.empty()) throw std::invalid_argument("URL without host: " + std::string(text));
  url.host = text::to_lower(url.host);
  url.port = default_port(url.scheme);
  if (!port_text.empty()) {
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value == 0 || value > 65535)
      throw std::invalid_argument("bad port in URL: " + std::string(text));
    url.port = static_cast<std::uint16_t>(value);
  }
  url.target = target.empty() ? "/" : std::string(target);
  if (url.target.front() == '?') url.target.insert(0, "/");
  return url;
}

std::string Url::origin() const {
  std::string out(to_string(scheme));
  out += "://";
  if (host.find(':') != std::string::npos) {
    out += "[" + host + "]";
  } else {
    out += host;
  }
  if (port != default_port(scheme)) out += ":" + std::to_string(port);
  return out;
}

Url Url::resolve(std::string_view location) const {
  if (location.find("://") != std::string_view::npos) return parse(location);
  if (location.starts_with("//")) return parse(std::string(to_string(scheme)) + ":" + std::string(location));
  Url out = *this;
  if (location.starts_with("/")) {
    out.target = std::string(location);
  } else {
    auto base = target.substr(0, target.find('?'));
    base = base.substr(0, base.rfind('/') + 1);
    out.target = base + std::string(location);
  }
  return out;
}

bool HeaderLess::operator()(const std::string& a, const std::string& b) const {
  return text::to_lower(a) < text::to_lower(b);
}

std::optional<std::string> Response::header(const std::string& name) const {
  if (const auto it = headers.find(name); it != headers.end()) return it->second;
  return std::nullopt;
}

namespace {

TransportErrorKind classify(httplib::Error err) {
  switch (err) {
    case httplib::Error::Connection: return TransportErrorKind::ConnectionRefused;
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
    case httplib::Error::Write: return TransportErrorKind::Timeout;
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    case httplib::Error::SSLConnection:
    case httplib::Error::SSLLoadingCerts:
    case httplib::Error::SSLServerVerification: return TransportErrorKind::Tls;
#endif
    default: return TransportErrorKind::Other;
  }
}

bool is_ip_literal(std::string_view host) {
  const std::string h(host);
  std::array<unsigned char, 16> buf{};
  return inet_pton(AF_INET, h.c_str(), buf.data()) == 1 || inet_pton(AF_INET6, h.c_str(), buf.data()) == 1;
}

}  // namespace

Result NetworkFetcher::get(const Url& url, const Headers& headers) {
  httplib::Headers request_headers;
  request_headers.emplace("User-Agent", options_.user_agent);
  for (const auto& [k, v] : headers) request_headers.emplace(k, v);

  auto run = [&](auto& client) -> Result {
    client.set_follow_location(false);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options_.connect_timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options_.read_timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options_.read_timeout));
    auto res = client.Get(url.target, request_headers);
    if (!res) {
      const auto err = res.error();
      return TransportError{classify(err), httplib::to_string(err)};
    }
    Response out;
    out.status = res->status;
    out.body = std::move(res->body);
    for (const auto& [k, v] : res->headers) out.headers.emplace(k, v);
    return out;
  };

  const std::string host = url.host.find(':') != std::string::npos ? "[" + url.host + "]" : url.host;
  if (url.scheme == Scheme::Https) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    httplib::SSLClient client(url.host, url.port);
    client.enable_server_certificate_verification(options_.verify_tls);
    return run(client);
#else
    return TransportError{TransportErrorKind::Tls, "built without TLS support"};
#endif
  }
  httplib::Client client(url.host, url.port);
  return run(client);
}

std::string registrable_domain(std::string_view host) {
  std::string h = text::to_lower(host);
  while (!h.empty() && h.back() == '.') h.pop_back();
  if (is_ip_literal(h)) return h;
  const auto labels = text::split(h, '.');
  if (labels.size() <= 2) return h;
  static constexpr std::array<std::string_view, 10> kSecondLevel = {"co", "com", "ac", "edu", "gov",
                                                                     "org", "net", "or", "ne", "go"};
  const auto n = labels.size();
  std::size_t keep = 2;
  if (labels[n - 1].size() == 2 &&
      std::find(kSecondLevel.begin(), kSecondLevel.end(), labels[n - 2]) != kSecondLevel.end())
    keep = 3;
  std::string out;
  for (std::size_t i = n - keep; i < n; ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

RedirectOutcome get_following(Fetcher& fetcher, const Url& url, int max_depth, const Headers& headers) {
  RedirectOutcome out{fetcher.get(url, headers), url, {}, std::nullopt, false};
  const auto domain = registrable_domain(url.host);
  for (int depth = 0;; ++depth) {
    const auto* response = std::get_if<Response>(&out.result);
    if (response == nullptr || !response->is_redirect()) return out;
    const auto location = response->header("Location");
    if (!location) return out;
    Url next;
    try {
      next = out.final_url.resolve(*location);
    } catch (const std::invalid_argument&) {
      return out;
    }
    if (registrable_domain(next.host) != domain) {
      out.cross_domain_target = next;
      return out;
    }
    if (depth >= max_depth) {
      out.depth_exceeded = true;
      return out;
    }
    out.chain.push_back(out.final_url);
    out.final_url = next;
    out.result = fetcher.get(next, headers);
  }
}

}  // namespace forgescope::http
