#include "vsensor/timeutil.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vsensor {

// Howard Hinnant's civil calendar algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400) + (m <= 2);
}

namespace {
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
}  // namespace

std::int64_t UtcHour::day_index() const { return floor_div(hours, 24); }

int UtcHour::hour_of_day() const { return static_cast<int>(hours - day_index() * 24); }

int UtcHour::day_of_week() const {
  // 1970-01-01 was a Thursday (Monday-based index 3).
  const std::int64_t d = day_index() + 3;
  return static_cast<int>(d - floor_div(d, 7) * 7);
}

int UtcHour::day_of_year() const {
  int y;
  unsigned m, d;
  civil_from_days(day_index(), y, m, d);
  return static_cast<int>(day_index() - days_from_civil(y, 1, 1));
}

int UtcHour::week_of_year() const { return day_of_year() / 7 + 1; }

UtcHour make_utc_hour(int year, unsigned month, unsigned day, unsigned hour) {
  return {days_from_civil(year, month, day) * 24 + static_cast<std::int64_t>(hour)};
}

namespace {
int parse_int(std::string_view s, std::size_t pos, std::size_t len) {
  int v = 0;
  const char* b = s.data() + pos;
  auto [p, ec] = std::from_chars(b, b + len, v);
  if (ec != std::errc() || p != b + len) throw std::invalid_argument("bad digits");
  return v;
}
}  // namespace

UtcHour parse_utc_hour(std::string_view text) {
  // 2019-03-01T14:00:00Z
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text[19] != 'Z') {
    throw std::invalid_argument("timestamp must look like YYYY-MM-DDTHH:00:00Z: '" +
                                std::string(text) + "'");
  }
  int y, mo, d, h, mi, se;
  try {
    y = parse_int(text, 0, 4);
    mo = parse_int(text, 5, 2);
    d = parse_int(text, 8, 2);
    h = parse_int(text, 11, 2);
    mi = parse_int(text, 14, 2);
    se = parse_int(text, 17, 2);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("non-numeric timestamp field: '" + std::string(text) + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23) {
    throw std::invalid_argument("timestamp out of range: '" + std::string(text) + "'");
  }
  int cy;
  unsigned cm, cd;
  civil_from_days(days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)), cy, cm, cd);
  if (cy != y || static_cast<int>(cm) != mo || static_cast<int>(cd) != d) {
    throw std::invalid_argument("invalid calendar date: '" + std::string(text) + "'");
  }
  if (mi != 0 || se != 0) {
    throw std::invalid_argument("timestamp not aligned to the hour: '" + std::string(text) + "'");
  }
  return make_utc_hour(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), static_cast<unsigned>(h));
}

std::string format_utc_hour(UtcHour t) {
  int y;
  unsigned m, d;
  civil_from_days(t.day_index(), y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00Z", y, m, d, t.hour_of_day());
  return buf;
}

std::array<double, 6> encode_time(UtcHour t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double ph = two_pi * t.hour_of_day() / 24.0;
  const double pd = two_pi * t.day_of_week() / 7.0;
  const double pw = two_pi * (t.week_of_year() - 1) / 52.0;
  return {std::sin(ph), std::cos(ph), std::sin(pd), std::cos(pd), std::sin(pw), std::cos(pw)};
}

}  // namespace vsensor
