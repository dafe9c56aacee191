#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "urbanflow/ingest.hpp"
#include "urbanflow/residence.hpp"
#include "urbanflow/timeutil.hpp"

namespace urbanflow::visits {

/// One device-day presence inside one mall.
struct VisitRow {
  std::string device_id;
  std::string mall_id;
  std::int64_t day = 0;  // local day index
};

/// Deduplicated (device, mall, day) facts with the derived per-device and
/// per-mall tallies the descriptive figures need.
class VisitTable {
 public:
  void add(const std::string& device_id, const std::string& mall_id, std::int64_t day);

  std::vector<VisitRow> rows() const;  // sorted (device, mall, day)
  std::size_t row_count() const { return total_rows_; }

  const std::map<std::string, std::map<std::string, std::set<std::int64_t>>>& by_device() const {
    return by_device_;
  }

  std::map<std::string, std::size_t> visits_per_device() const;
  std::map<std::string, std::size_t> distinct_malls_per_device() const;
  /// Unique visitor count per mall.
  std::map<std::string, std::size_t> unique_visitors_per_mall() const;
  /// Unique visitor device sets per mall.
  std::map<std::string, std::set<std::string>> visitor_sets() const;

 private:
  std::map<std::string, std::map<std::string, std::set<std::int64_t>>> by_device_;
  std::size_t total_rows_ = 0;
};

/// Streaming visit detection: fold an event; events on antennas without a
/// mall assignment are ignored. Duplicate events collapse into one row.
class VisitAccumulator {
 public:
  VisitAccumulator(const ingest::AntennaRegistry& registry, timeutil::UtcOffset tz)
      : registry_(registry), tz_(tz) {}
  void fold(const ingest::EventRecord& event);
  VisitTable finish() { return std::move(table_); }

 private:
  const ingest::AntennaRegistry& registry_;
  timeutil::UtcOffset tz_;
  VisitTable table_;
};

VisitTable detect_visits(const std::vector<ingest::EventRecord>& events,
                         const ingest::AntennaRegistry& registry, timeutil::UtcOffset tz);

/// Removes devices whose total day-presences exceed the threshold
/// (strictly greater; a device with exactly `max_day_presences` stays).
struct VisitorFilterResult {
  VisitTable customers;
  std::vector<std::string> discarded_devices;
};
VisitorFilterResult filter_nonvisitors(const VisitTable& table,
                                       std::size_t max_day_presences = 10);

/// Sparse histogram over (total visit rows, distinct malls) per device.
std::map<std::pair<std::size_t, std::size_t>, std::size_t> presence_histogram(
    const VisitTable& table);

/// Row-normalized comuna x mall matrix: entry (c, m) is the share of comuna
/// c residents' visits going to mall m. Comunas with zero visiting devices
/// keep a zero row and are flagged.
struct ComunaMallMatrix {
  std::vector<std::string> comunas;
  std::vector<std::string> malls;
  std::vector<std::vector<double>> shares;  // rows sum to 1 (or 0 when flagged)
  std::vector<std::string> zero_rows;
};
ComunaMallMatrix comuna_mall_matrix(const VisitTable& table,
                                    const std::vector<residence::HomeAssignment>& homes);

}  // namespace urbanflow::visits
