#include "urbanflow/timeutil.hpp"

#include <charconv>
#include <cstdio>

namespace urbanflow::timeutil {

std::int64_t days_from_civil(const CivilDate& d) {
  std::int64_t y = d.year;
  const int m = d.month;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);                  // [0, 399]
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;   // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;                 // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

bool valid_date(const CivilDate& d) {
  if (d.month < 1 || d.month > 12 || d.day < 1) return false;
  return civil_from_days(days_from_civil(d)) == d;
}

namespace {

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::optional<CivilDate> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  CivilDate d;
  if (!parse_int(s.substr(0, 4), d.year) || !parse_int(s.substr(5, 2), d.month) ||
      !parse_int(s.substr(8, 2), d.day))
    return std::nullopt;
  if (!valid_date(d)) return std::nullopt;
  return d;
}

std::string format_date(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::optional<UtcOffset> UtcOffset::parse(std::string_view s) {
  if (s == "Z" || s == "z" || s == "UTC" || s == "utc") return UtcOffset{0};
  if (s.substr(0, 3) == "UTC" || s.substr(0, 3) == "utc") s.remove_prefix(3);
  if (s.empty()) return std::nullopt;
  int sign;
  if (s[0] == '+')
    sign = 1;
  else if (s[0] == '-')
    sign = -1;
  else
    return std::nullopt;
  s.remove_prefix(1);

  int hours = 0, minutes = 0;
  if (s.size() == 2) {
    if (!parse_int(s, hours)) return std::nullopt;
  } else if (s.size() == 5 && s[2] == ':') {
    if (!parse_int(s.substr(0, 2), hours) || !parse_int(s.substr(3, 2), minutes))
      return std::nullopt;
  } else if (s.size() == 4) {  // "-0400"
    if (!parse_int(s.substr(0, 2), hours) || !parse_int(s.substr(2, 2), minutes))
      return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (hours > 18 || minutes > 59) return std::nullopt;
  return UtcOffset{sign * (hours * 3600 + minutes * 60)};
}

std::string UtcOffset::to_string() const {
  const int s = seconds < 0 ? -seconds : seconds;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%c%02d:%02d", seconds < 0 ? '-' : '+', s / 3600,
                (s % 3600) / 60);
  return buf;
}

bool looks_like_epoch(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

std::optional<std::int64_t> parse_timestamp(std::string_view s, bool epoch_format) {
  if (epoch_format) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
  }

  // ISO-8601: YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|±HH[:MM]]
  if (s.size() < 19) return std::nullopt;
  auto date = parse_date(s.substr(0, 10));
  if (!date) return std::nullopt;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  if (s[13] != ':' || s[16] != ':') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_int(s.substr(11, 2), hh) || !parse_int(s.substr(14, 2), mm) ||
      !parse_int(s.substr(17, 2), ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  if (ss == 60) ss = 59;  // fold leap seconds

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  UtcOffset off{0};
  if (pos < s.size()) {
    auto parsed = UtcOffset::parse(s.substr(pos));
    if (!parsed) return std::nullopt;
    off = *parsed;
  }
  // else: no designator; treat as UTC

  const std::int64_t days = days_from_civil(*date);
  return days * 86400 + hh * 3600 + mm * 60 + ss - off.seconds;
}

std::string format_iso8601(std::int64_t epoch_seconds, UtcOffset tz) {
  const LocalTime lt = to_local(epoch_seconds, tz);
  const CivilDate d = civil_from_days(lt.day);
  const int sod = lt.seconds_of_day;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d%s", d.year, d.month, d.day,
                sod / 3600, (sod % 3600) / 60, sod % 60, tz.to_string().c_str());
  return buf;
}

}  // namespace urbanflow::timeutil
