#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace vsensor {

// A UTC timestamp truncated to the hour, stored as hours since 1970-01-01T00Z.
struct UtcHour {
  std::int64_t hours = 0;

  auto operator<=>(const UtcHour&) const = default;
  UtcHour operator+(std::int64_t h) const { return {hours + h}; }
  std::int64_t operator-(UtcHour o) const { return hours - o.hours; }

  int hour_of_day() const;
  // Monday = 0 ... Sunday = 6.
  int day_of_week() const;
  // Zero-based day within the calendar year.
  int day_of_year() const;
  // 1-based week within the calendar year: day_of_year / 7 + 1 (1..53).
  int week_of_year() const;
  std::int64_t day_index() const;
};

std::int64_t days_from_civil(int y, unsigned m, unsigned d);
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d);

UtcHour make_utc_hour(int year, unsigned month, unsigned day, unsigned hour);

// Parses `YYYY-MM-DDTHH:00:00Z`. Throws FormatError-compatible
// std::invalid_argument on malformed or non-hour-aligned input.
UtcHour parse_utc_hour(std::string_view text);
std::string format_utc_hour(UtcHour t);

// (sin, cos) pairs for hour-of-day (period 24), day-of-week (period 7) and
// week-of-year (period 52).
std::array<double, 6> encode_time(UtcHour t);

}  // namespace vsensor
