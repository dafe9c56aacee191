#include "urbanflow/residence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "urbanflow/numerics/stats.hpp"

namespace urbanflow::residence {

namespace {
constexpr int kMorningCutoff = 8 * 3600;   // strictly before 08:00
constexpr int kEveningCutoff = 22 * 3600;  // strictly after 22:00
}  // namespace

void EndpointAccumulator::fold(const ingest::EventRecord& event,
                               const ingest::AntennaRegistry& registry,
                               timeutil::UtcOffset tz) {
  const timeutil::LocalTime lt = timeutil::to_local(event.timestamp, tz);
  const bool morning = lt.seconds_of_day < kMorningCutoff;
  const bool evening = lt.seconds_of_day > kEveningCutoff;
  if (!morning && !evening) return;
  const std::string& tower = registry.at(event.antenna_id).tower_id;
  auto& x = days_[lt.day];
  if (morning && (x.first_tower.empty() || event.timestamp < x.first_ts)) {
    x.first_ts = event.timestamp;
    x.first_tower = tower;
  }
  if (evening && (x.last_tower.empty() || event.timestamp > x.last_ts)) {
    x.last_ts = event.timestamp;
    x.last_tower = tower;
  }
}

EndpointsByDay EndpointAccumulator::finish() const {
  EndpointsByDay out;
  for (const auto& [day, x] : days_) {
    DayEndpoints d;
    if (!x.first_tower.empty()) d.first_tower = x.first_tower;
    if (!x.last_tower.empty()) d.last_tower = x.last_tower;
    out.emplace(day, std::move(d));
  }
  return out;
}

EndpointsByDay daily_endpoints(const std::vector<ingest::EventRecord>& events,
                               const ingest::AntennaRegistry& registry,
                               timeutil::UtcOffset tz) {
  EndpointAccumulator acc;
  for (const auto& e : events) acc.fold(e, registry, tz);
  return acc.finish();
}

std::optional<HomeAssignment> infer_home(const std::string& device_id,
                                         const EndpointsByDay& endpoints, int days_in_period,
                                         const ingest::AntennaRegistry& registry,
                                         const HomeThresholds& thresholds,
                                         HomeRejection* rejection) {
  if (days_in_period <= 0) throw std::invalid_argument("infer_home: days_in_period must be > 0");

  auto rejected = [&](const char* reason) -> std::optional<HomeAssignment> {
    if (rejection) *rejection = {device_id, reason};
    return std::nullopt;
  };

  // Pool first and last observations into one multiset per tower.
  std::map<std::string, int> tower_counts;
  int observations = 0;
  int days_observed = 0;
  for (const auto& [day, d] : endpoints) {
    if (!d.first_tower && !d.last_tower) continue;
    ++days_observed;
    if (d.first_tower) {
      ++tower_counts[*d.first_tower];
      ++observations;
    }
    if (d.last_tower) {
      ++tower_counts[*d.last_tower];
      ++observations;
    }
  }
  if (observations == 0) return rejected("no_endpoints");

  // Modal tower; ties broken by the smallest antenna_id registered on the
  // tied towers.
  int best_count = 0;
  std::string best_tower, best_antenna;
  for (const auto& [tower, count] : tower_counts) {
    if (count < best_count) continue;
    const std::string& antenna = registry.tower_representative(tower);
    if (count > best_count || best_antenna.empty() || antenna < best_antenna) {
      best_count = count;
      best_tower = tower;
      best_antenna = antenna;
    }
  }

  const double coverage = double(days_observed) / double(days_in_period);
  const double share = double(best_count) / double(observations);
  if (coverage < thresholds.day_coverage) return rejected("low_day_coverage");
  if (share < thresholds.tower_share) return rejected("low_tower_share");

  const ingest::AntennaSite& site = registry.at(best_antenna);
  HomeAssignment h;
  h.device_id = device_id;
  h.home_antenna_id = best_antenna;
  h.home_tower_id = best_tower;
  h.home_cell_id = geo::snap_to_grid(site.lat, site.lon);
  h.days_observed = days_observed;
  h.days_in_period = days_in_period;
  h.top_tower_share = share;
  return h;
}

double compute_hdi(double i_health, double i_education, double i_income) {
  for (double v : {i_health, i_education, i_income})
    if (!(v > 0.0 && v <= 1.0))
      throw std::invalid_argument("compute_hdi: components must lie in (0,1]");
  return std::cbrt(i_health * i_education * i_income);
}

double census_correlation(const std::vector<HomeAssignment>& assignments,
                          const std::unordered_map<std::string, double>& census_per_comuna) {
  std::map<std::string, double> counts;
  for (const auto& h : assignments) ++counts[h.comuna_id];

  std::vector<double> inferred, census;
  for (const auto& [comuna, count] : counts) {
    auto it = census_per_comuna.find(comuna);
    if (it == census_per_comuna.end()) continue;
    inferred.push_back(count);
    census.push_back(it->second);
  }
  if (inferred.size() < 3)
    throw std::invalid_argument("census_correlation: need at least 3 comunas with home counts");
  return numerics::pearson(inferred, census);
}

std::size_t HdiQuantileTable::bin_of(double hdi) const {
  for (std::size_t i = 1; i + 1 < boundaries.size(); ++i)
    if (hdi <= boundaries[i]) return i - 1;
  return labels.size() - 1;
}

HdiQuantileTable quantize_hdi(const std::vector<double>& device_hdi, int k) {
  if (k < 2) throw std::invalid_argument("quantize_hdi: k must be >= 2");
  std::vector<double> sorted = device_hdi;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  // Distinct values with multiplicities.
  std::vector<std::pair<double, std::size_t>> groups;
  for (double v : sorted) {
    if (!groups.empty() && groups.back().first == v)
      ++groups.back().second;
    else
      groups.push_back({v, 1});
  }
  if (groups.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("quantize_hdi: fewer distinct HDI values than bins");

  HdiQuantileTable table;
  table.boundaries.push_back(groups.front().first - 1e-9);

  // Greedy walk over tie groups: close bin b once its cumulative count
  // reaches ceil(n*b/k), keeping whole tie groups together. When exactly as
  // many groups remain as bins, force one group per bin so no bin is empty.
  std::size_t cum = 0, bin_count = 0;
  int bin = 1;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    cum += groups[g].second;
    bin_count += groups[g].second;
    const std::size_t target = (n * static_cast<std::size_t>(bin) + k - 1) / k;
    const std::size_t groups_left = groups.size() - g - 1;
    const std::size_t bins_left = static_cast<std::size_t>(k - bin);
    const bool must_close = groups_left == bins_left && bins_left > 0;
    if (bin < k && (cum >= target || must_close)) {
      table.boundaries.push_back(groups[g].first);
      table.counts.push_back(bin_count);
      bin_count = 0;
      ++bin;
    }
  }
  table.boundaries.push_back(groups.back().first);
  table.counts.push_back(bin_count);
  for (int i = 1; i <= k; ++i) table.labels.push_back("Q" + std::to_string(i));
  return table;
}

}  // namespace urbanflow::residence
