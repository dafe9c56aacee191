#include "urbanflow/visits.hpp"

#include <algorithm>

namespace urbanflow::visits {

void VisitTable::add(const std::string& device_id, const std::string& mall_id,
                     std::int64_t day) {
  auto& days = by_device_[device_id][mall_id];
  if (days.insert(day).second) ++total_rows_;
}

std::vector<VisitRow> VisitTable::rows() const {
  std::vector<VisitRow> out;
  out.reserve(total_rows_);
  for (const auto& [device, malls] : by_device_)
    for (const auto& [mall, days] : malls)
      for (std::int64_t day : days) out.push_back({device, mall, day});
  return out;
}

std::map<std::string, std::size_t> VisitTable::visits_per_device() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [device, malls] : by_device_) {
    std::size_t total = 0;
    for (const auto& [mall, days] : malls) total += days.size();
    out[device] = total;
  }
  return out;
}

std::map<std::string, std::size_t> VisitTable::distinct_malls_per_device() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [device, malls] : by_device_) out[device] = malls.size();
  return out;
}

std::map<std::string, std::size_t> VisitTable::unique_visitors_per_mall() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [device, malls] : by_device_)
    for (const auto& [mall, days] : malls) ++out[mall];
  return out;
}

std::map<std::string, std::set<std::string>> VisitTable::visitor_sets() const {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [device, malls] : by_device_)
    for (const auto& [mall, days] : malls) out[mall].insert(device);
  return out;
}

void VisitAccumulator::fold(const ingest::EventRecord& event) {
  const ingest::AntennaSite& site = registry_.at(event.antenna_id);
  if (!site.mall_id) return;
  const timeutil::LocalTime lt = timeutil::to_local(event.timestamp, tz_);
  table_.add(event.device_id, *site.mall_id, lt.day);
}

VisitTable detect_visits(const std::vector<ingest::EventRecord>& events,
                         const ingest::AntennaRegistry& registry, timeutil::UtcOffset tz) {
  VisitAccumulator acc(registry, tz);
  for (const auto& e : events) acc.fold(e);
  return acc.finish();
}

VisitorFilterResult filter_nonvisitors(const VisitTable& table,
                                       std::size_t max_day_presences) {
  VisitorFilterResult result;
  for (const auto& [device, malls] : table.by_device()) {
    std::size_t presences = 0;
    for (const auto& [mall, days] : malls) presences += days.size();
    if (presences > max_day_presences) {
      result.discarded_devices.push_back(device);
      continue;
    }
    for (const auto& [mall, days] : malls)
      for (std::int64_t day : days) result.customers.add(device, mall, day);
  }
  return result;
}

std::map<std::pair<std::size_t, std::size_t>, std::size_t> presence_histogram(
    const VisitTable& table) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> hist;
  for (const auto& [device, malls] : table.by_device()) {
    std::size_t total = 0;
    for (const auto& [mall, days] : malls) total += days.size();
    ++hist[{total, malls.size()}];
  }
  return hist;
}

ComunaMallMatrix comuna_mall_matrix(const VisitTable& table,
                                    const std::vector<residence::HomeAssignment>& homes) {
  std::unordered_map<std::string, const residence::HomeAssignment*> home_of;
  for (const auto& h : homes) home_of[h.device_id] = &h;

  std::set<std::string> comuna_set, mall_set;
  for (const auto& h : homes) comuna_set.insert(h.comuna_id);
  std::map<std::pair<std::string, std::string>, double> counts;
  for (const auto& [device, malls] : table.by_device()) {
    auto it = home_of.find(device);
    if (it == home_of.end()) continue;  // device without a retained home
    for (const auto& [mall, days] : malls) {
      mall_set.insert(mall);
      counts[{it->second->comuna_id, mall}] += double(days.size());
    }
  }

  ComunaMallMatrix m;
  m.comunas.assign(comuna_set.begin(), comuna_set.end());
  m.malls.assign(mall_set.begin(), mall_set.end());
  m.shares.assign(m.comunas.size(), std::vector<double>(m.malls.size(), 0.0));
  for (std::size_t c = 0; c < m.comunas.size(); ++c) {
    double row_total = 0;
    for (std::size_t j = 0; j < m.malls.size(); ++j) {
      auto it = counts.find({m.comunas[c], m.malls[j]});
      if (it != counts.end()) {
        m.shares[c][j] = it->second;
        row_total += it->second;
      }
    }
    if (row_total > 0) {
      for (auto& v : m.shares[c]) v /= row_total;
    } else {
      m.zero_rows.push_back(m.comunas[c]);
    }
  }
  return m;
}

}  // namespace urbanflow::visits
