#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forgescope {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::chrono::sys_seconds;

inline Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

inline Timestamp from_epoch(std::int64_t seconds) { return Timestamp{std::chrono::seconds{seconds}}; }

inline std::int64_t to_epoch(Timestamp t) { return t.time_since_epoch().count(); }

/// "YYYY-MM-DDTHH:MM:SSZ"
inline std::string format_iso8601(Timestamp t) {
  const std::time_t tt = static_cast<std::time_t>(to_epoch(t));
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// "YYYY-MM" of the UTC calendar month containing t.
inline std::string format_month(Timestamp t) {
  const std::time_t tt = static_cast<std::time_t>(to_epoch(t));
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m", &tm);
  return buf;
}

/// Accepts "YYYY-MM-DDTHH:MM:SS" followed by "Z", "+HH:MM", "-HHMM" or nothing
/// (UTC assumed). Fractional seconds are ignored.
inline std::optional<Timestamp> parse_iso8601(std::string_view s) {
  int year = 0, mon = 0, day = 0, hour = 0, min = 0, sec = 0;
  if (s.size() < 19) return std::nullopt;
  const std::string head(s.substr(0, 19));
  if (std::sscanf(head.c_str(), "%4d-%2d-%2d%*1[T ]%2d:%2d:%2d", &year, &mon, &day, &hour, &min,
                  &sec) != 6)
    return std::nullopt;
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = mon - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = min;
  tm.tm_sec = sec;
  std::int64_t epoch = timegm(&tm);
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t i = 1;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
    rest.remove_prefix(i);
  }
  if (rest.empty() || rest == "Z" || rest == "z") return from_epoch(epoch);
  if (rest.front() == '+' || rest.front() == '-') {
    const int sign = rest.front() == '+' ? 1 : -1;
    std::string digits;
    for (const char c : rest.substr(1))
      if (c >= '0' && c <= '9') digits.push_back(c);
    if (digits.size() != 4) return std::nullopt;
    const int offset = std::stoi(digits.substr(0, 2)) * 3600 + std::stoi(digits.substr(2, 2)) * 60;
    return from_epoch(epoch - sign * offset);
  }
  return std::nullopt;
}

inline Timestamp parse_iso8601_or_throw(std::string_view s) {
  auto t = parse_iso8601(s);
  if (!t) throw std::invalid_argument("invalid timestamp: " + std::string(s));
  return *t;
}

}  // namespace forgescope
