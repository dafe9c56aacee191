#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "urbanflow/geo.hpp"
#include "urbanflow/ingest.hpp"
#include "urbanflow/timeutil.hpp"

namespace urbanflow::residence {

struct HomeAssignment {
  std::string device_id;
  std::string home_antenna_id;
  std::string home_tower_id;
  geo::CellId home_cell_id;
  std::string comuna_id;
  double hdi = 0.0;
  int days_observed = 0;
  int days_in_period = 0;
  double top_tower_share = 0.0;
};

/// Daily first/last towers of one device: the tower of the earliest event
/// strictly before 08:00 and of the latest event strictly after 22:00,
/// in local civil time. Days with neither produce no entry.
struct DayEndpoints {
  std::optional<std::string> first_tower;  // earliest event before 08:00
  std::optional<std::string> last_tower;   // latest event after 22:00
};

/// Map keyed by local day index (days since epoch in the given offset).
using EndpointsByDay = std::map<std::int64_t, DayEndpoints>;

/// Streaming accumulator: fold events one at a time (any order), then
/// finish() to the per-day endpoints. Used by the pipeline so the event
/// file never has to be materialized.
class EndpointAccumulator {
 public:
  void fold(const ingest::EventRecord& event, const ingest::AntennaRegistry& registry,
            timeutil::UtcOffset tz);
  EndpointsByDay finish() const;
  bool empty() const { return days_.empty(); }

 private:
  struct Extremes {
    std::int64_t first_ts = 0;
    std::int64_t last_ts = 0;
    std::string first_tower;
    std::string last_tower;
  };
  std::map<std::int64_t, Extremes> days_;
};

/// Events need not be sorted. Tower ids come from the antenna registry.
EndpointsByDay daily_endpoints(const std::vector<ingest::EventRecord>& events,
                               const ingest::AntennaRegistry& registry,
                               timeutil::UtcOffset tz);

struct HomeThresholds {
  double day_coverage = 0.8;   // days_observed / days_in_period, inclusive
  double tower_share = 0.6;    // modal tower share, inclusive
};

struct HomeRejection {
  std::string device_id;
  std::string reason;  // "no_endpoints", "low_day_coverage", "low_tower_share"
};

/// Modal tower over the pooled multiset of first/last observations. Ties
/// broken by the smallest antenna_id registered on the tied towers.
/// Retention requires both thresholds (inclusive).
std::optional<HomeAssignment> infer_home(const std::string& device_id,
                                         const EndpointsByDay& endpoints, int days_in_period,
                                         const ingest::AntennaRegistry& registry,
                                         const HomeThresholds& thresholds,
                                         HomeRejection* rejection = nullptr);

/// UN 2010-style HDI: geometric mean of the three component indices, each
/// in (0,1].
double compute_hdi(double i_health, double i_education, double i_income);

/// Pearson correlation between per-comuna inferred home counts and census
/// populations. Requires >= 3 comunas with nonzero counts.
double census_correlation(const std::vector<HomeAssignment>& assignments,
                          const std::unordered_map<std::string, double>& census_per_comuna);

struct HdiQuantileTable {
  std::vector<double> boundaries;  // size k+1; bin i is (boundaries[i], boundaries[i+1]]
  std::vector<std::string> labels;  // "Q1".."Qk"
  std::vector<std::size_t> counts;

  /// Label index for an HDI value; values at or below the lowest boundary
  /// fall into the first bin.
  std::size_t bin_of(double hdi) const;
};

/// Equal-count quantile bins over the devices' HDI values. Devices sharing
/// an HDI value are never split across bins, so counts may be unequal in
/// the presence of ties. Throws when fewer than k distinct values exist.
HdiQuantileTable quantize_hdi(const std::vector<double>& device_hdi, int k);

}  // namespace urbanflow::residence
