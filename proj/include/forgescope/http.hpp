#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace forgescope::http {

enum class Scheme { Http, Https };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);
std::uint16_t default_port(Scheme s);

struct Url {
  Scheme scheme = Scheme::Https;
  std::string host;  // IPv6 literals stored without brackets
  std::uint16_t port = 443;
  std::string target = "/";  // path plus optional query

  /// Parses absolute http(s) URLs. Throws std::invalid_argument otherwise.
  static Url parse(std::string_view text);

  std::string origin() const;
  std::string str() const { return origin() + target; }

  /// Resolves a Location header (absolute, scheme-relative, or path).
  Url resolve(std::string_view location) const;

  bool operator==(const Url&) const = default;
};

/// Case-insensitive header map.
struct HeaderLess {
  bool operator()(const std::string& a, const std::string& b) const;
};
using Headers = std::map<std::string, std::string, HeaderLess>;

struct Response {
  int status = 0;
  std::string body;
  Headers headers;

  std::optional<std::string> header(const std::string& name) const;
  bool is_redirect() const { return status >= 300 && status < 400 && status != 304; }
};

enum class TransportErrorKind { Timeout, ConnectionRefused, Tls, Other };
std::string_view to_string(TransportErrorKind k);

struct TransportError {
  TransportErrorKind kind = TransportErrorKind::Other;
  std::string message;
};

using Result = std::variant<Response, TransportError>;

/// One GET request, never following redirects. Implementations must be safe
/// to call from several threads.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual Result get(const Url& url, const Headers& headers = {}) = 0;
};

struct FetcherOptions {
  std::chrono::milliseconds connect_timeout{10'000};
  std::chrono::milliseconds read_timeout{30'000};
  std::string user_agent = "forgescope/1.0";
  bool verify_tls = true;
};

/// Real network fetcher backed by cpp-httplib; a fresh connection per call.
class NetworkFetcher final : public Fetcher {
 public:
  explicit NetworkFetcher(FetcherOptions options = {}) : options_(std::move(options)) {}
  Result get(const Url& url, const Headers& headers = {}) override;

 private:
  FetcherOptions options_;
};

/// Registrable domain approximation: IP literals map to themselves; names to
/// their last two labels, or last three when the second-level label is a
/// common public-suffix component (co.uk, ac.jp, com.au, ...).
std::string registrable_domain(std::string_view host);

struct RedirectOutcome {
  Result result;
  Url final_url;
  std::vector<Url> chain;                  // URLs redirected through
  std::optional<Url> cross_domain_target;  // set when a redirect left the domain
  bool depth_exceeded = false;
};

/// GET following redirects up to `max_depth` hops while they stay within the
/// starting host's registrable domain. A cross-domain redirect is not
/// followed; the 3xx response is returned with `cross_domain_target` set.
RedirectOutcome get_following(Fetcher& fetcher, const Url& url, int max_depth = 5,
                              const Headers& headers = {});

}  // namespace forgescope::http
