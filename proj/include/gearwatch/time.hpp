/**
 * @file time.hpp
 * @brief UTC timestamp parsing/formatting and ISO-8601 week arithmetic.
 */
#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace gearwatch {

using Timestamp = std::chrono::sys_seconds;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) {
    return false;
  }
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') {
      return false;
    }
  }
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}

}  // namespace detail

/// Parse `YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]`. A missing zone means UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    return std::nullopt;
  }
  if (!detail::parse_fixed_int(s, 0, 4, y) || !detail::parse_fixed_int(s, 5, 2, mo) ||
      !detail::parse_fixed_int(s, 8, 2, d) || !detail::parse_fixed_int(s, 11, 2, h) ||
      !detail::parse_fixed_int(s, 14, 2, mi)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!detail::parse_fixed_int(s, pos + 1, 2, sec)) {
      return std::nullopt;
    }
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;  // sub-second part is truncated
    }
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    const char z = s[pos];
    if (z == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if ((z == '+' || z == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!detail::parse_fixed_int(s, pos + 1, 2, oh) || !detail::parse_fixed_int(s, pos + 4, 2, om)) {
        return std::nullopt;
      }
      offset_minutes = (z == '+' ? 1 : -1) * (oh * 60 + om);
      pos += 6;
    } else {
      return std::nullopt;
    }
  }
  if (h > 23 || mi > 59 || sec > 60) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    return std::nullopt;
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

/// `YYYY-MM-DDTHH:MM:SSZ`
inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline int calendar_year(Timestamp t) {
  using namespace std::chrono;
  return static_cast<int>(year_month_day{floor<days>(t)}.year());
}

struct IsoWeek {
  int year{};
  int week{};  // 1..53

  auto operator<=>(const IsoWeek&) const = default;
};

inline IsoWeek iso_week_of(std::chrono::sys_days d) {
  using namespace std::chrono;
  const unsigned wd = weekday{d}.iso_encoding();  // Mon = 1 .. Sun = 7
  const sys_days thursday = d + days{4 - static_cast<int>(wd)};
  const year iso_year = year_month_day{thursday}.year();
  const sys_days jan1{iso_year / January / 1};
  return {static_cast<int>(iso_year), static_cast<int>((thursday - jan1).count() / 7 + 1)};
}

inline IsoWeek iso_week_of(Timestamp t) { return iso_week_of(std::chrono::floor<std::chrono::days>(t)); }

/// Monday 00:00 UTC starting the given ISO week.
inline std::chrono::sys_days iso_week_start(IsoWeek w) {
  using namespace std::chrono;
  const sys_days jan4{year{w.year} / January / 4};
  const sys_days week1 = jan4 - days{weekday{jan4}.iso_encoding() - 1};
  return week1 + days{7 * (w.week - 1)};
}

/// True when `b` is the ISO week immediately following `a`.
inline bool consecutive_weeks(IsoWeek a, IsoWeek b) {
  return iso_week_start(b) - iso_week_start(a) == std::chrono::days{7};
}

}  // namespace gearwatch
