#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace urbanflow::timeutil {

/// Proleptic Gregorian calendar date.
struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
  friend auto operator<=>(const CivilDate&, const CivilDate&) = default;
};

/// Days since 1970-01-01 (Howard Hinnant's days_from_civil).
std::int64_t days_from_civil(const CivilDate& d);
CivilDate civil_from_days(std::int64_t z);
bool valid_date(const CivilDate& d);

/// "YYYY-MM-DD" <-> CivilDate.
std::optional<CivilDate> parse_date(std::string_view s);
std::string format_date(const CivilDate& d);

/// Fixed UTC offset. Analysis windows in this pipeline use civil time under
/// one fixed offset; there is no DST handling.
struct UtcOffset {
  int seconds = 0;

  /// Accepts "-04:00", "+05:30", "-04", "UTC-04", "UTC-04:00", "Z", "UTC".
  static std::optional<UtcOffset> parse(std::string_view s);
  std::string to_string() const;
};

struct LocalTime {
  std::int64_t day;        // local civil day index (days since epoch, local)
  int seconds_of_day;      // 0..86399
};

inline LocalTime to_local(std::int64_t epoch_seconds, UtcOffset tz) {
  std::int64_t t = epoch_seconds + tz.seconds;
  std::int64_t day = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  return {day, static_cast<int>(t - day * 86400)};
}

/// Parse one timestamp field. `epoch_format` selects between integer epoch
/// seconds and ISO-8601 with offset ("2016-08-01T07:30:00-04:00", 'Z', or a
/// space separator; fractional seconds are accepted and ignored).
std::optional<std::int64_t> parse_timestamp(std::string_view s, bool epoch_format);

/// Heuristic used once per file: an all-digit (optionally signed) field is
/// epoch seconds, anything else is treated as ISO-8601.
bool looks_like_epoch(std::string_view s);

/// Epoch seconds -> "YYYY-MM-DDTHH:MM:SS+HH:MM" in the given offset.
std::string format_iso8601(std::int64_t epoch_seconds, UtcOffset tz);

}  // namespace urbanflow::timeutil
