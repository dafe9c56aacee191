#include "urbanflow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urbanflow/csv.hpp"
#include "urbanflow/timeutil.hpp"

namespace urbanflow::ingest {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out) {
  const std::string v = lower(s);
  if (v == "true" || v == "1" || v == "yes") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

void AntennaRegistry::add(AntennaSite site) {
  if (index_.count(site.antenna_id))
    throw std::runtime_error("duplicate antenna_id: " + site.antenna_id);
  auto [it, inserted] = tower_rep_.try_emplace(site.tower_id, site.antenna_id);
  if (!inserted && site.antenna_id < it->second) it->second = site.antenna_id;
  index_[site.antenna_id] = sites_.size();
  sites_.push_back(std::move(site));
}

const AntennaSite* AntennaRegistry::find(const std::string& antenna_id) const {
  auto it = index_.find(antenna_id);
  return it == index_.end() ? nullptr : &sites_[it->second];
}

const AntennaSite& AntennaRegistry::at(const std::string& antenna_id) const {
  const AntennaSite* s = find(antenna_id);
  if (!s) throw std::out_of_range("unknown antenna_id: " + antenna_id);
  return *s;
}

const std::string& AntennaRegistry::tower_representative(const std::string& tower_id) const {
  auto it = tower_rep_.find(tower_id);
  if (it == tower_rep_.end()) throw std::out_of_range("unknown tower_id: " + tower_id);
  return it->second;
}

void ParseStats::reject(std::size_t line, std::string reason) {
  ++rejected;
  ++reason_counts[reason];
  if (rejections.size() < max_logged) rejections.push_back({line, std::move(reason)});
}

ParseStats parse_events(std::istream& in, const AntennaRegistry& registry,
                        const std::function<void(const EventRecord&)>& sink,
                        const std::string& source_name) {
  csv::Reader reader(in, source_name);
  const std::size_t c_dev = reader.column("device_id");
  const std::size_t c_ts = reader.column("timestamp");
  const std::size_t c_ant = reader.column("antenna_id");
  const std::size_t c_down = reader.column("bytes_down");
  const std::size_t c_up = reader.column("bytes_up");
  const std::size_t width = reader.header().size();

  ParseStats stats;
  bool format_known = false;
  bool epoch_format = false;

  std::vector<std::string> f;
  EventRecord rec;
  while (reader.next(f)) {
    const std::size_t line = reader.line_number();
    if (f.size() != width) {
      stats.reject(line, "bad_field_count");
      continue;
    }
    if (f[c_dev].empty()) {
      stats.reject(line, "empty_device_id");
      continue;
    }
    if (!format_known) {
      epoch_format = timeutil::looks_like_epoch(f[c_ts]);
      format_known = true;
    }
    auto ts = timeutil::parse_timestamp(f[c_ts], epoch_format);
    if (!ts) {
      stats.reject(line, "bad_timestamp");
      continue;
    }
    if (!registry.find(f[c_ant])) {
      stats.reject(line, "unknown_antenna");
      continue;
    }
    std::int64_t down = 0, up = 0;
    if (!parse_i64(f[c_down], down) || !parse_i64(f[c_up], up)) {
      stats.reject(line, "bad_bytes");
      continue;
    }
    if (down < 0 || up < 0) {
      stats.reject(line, "negative_bytes");
      continue;
    }
    rec.device_id = f[c_dev];
    rec.timestamp = *ts;
    rec.antenna_id = f[c_ant];
    rec.bytes_down = down;
    rec.bytes_up = up;
    ++stats.emitted;
    sink(rec);
  }
  return stats;
}

std::pair<std::vector<EventRecord>, ParseStats> read_events(std::istream& in,
                                                            const AntennaRegistry& registry) {
  std::vector<EventRecord> records;
  ParseStats stats =
      parse_events(in, registry, [&](const EventRecord& r) { records.push_back(r); });
  return {std::move(records), std::move(stats)};
}

AntennaRegistry load_antennas(const std::string& path) {
  auto file = csv::open_input(path);
  csv::Reader reader(file, path);
  const std::size_t c_id = reader.column("antenna_id");
  const std::size_t c_tower = reader.column("tower_id");
  const std::size_t c_lat = reader.column("lat");
  const std::size_t c_lon = reader.column("lon");
  const std::size_t c_indoor = reader.column("indoor");
  const std::size_t c_desc = reader.column("description");

  AntennaRegistry registry;
  std::vector<std::string> f;
  while (reader.next(f)) {
    AntennaSite s;
    s.antenna_id = f.at(c_id);
    s.tower_id = f.at(c_tower);
    if (!parse_f64(f.at(c_lat), s.lat) || !parse_f64(f.at(c_lon), s.lon))
      throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                               ": bad coordinates");
    geo::validate_coords(s.lat, s.lon);
    if (!parse_bool(f.at(c_indoor), s.indoor))
      throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                               ": bad indoor flag");
    s.description = f.at(c_desc);
    registry.add(std::move(s));
  }
  return registry;
}

namespace {

geo::Ring parse_geojson_ring(const nlohmann::json& coords, const std::string& what) {
  if (!coords.is_array() || coords.empty())
    throw std::runtime_error(what + ": polygon without coordinates");
  const nlohmann::json& outer = coords[0];  // outer ring; holes unsupported
  geo::Ring ring;
  for (const auto& pt : outer) {
    if (!pt.is_array() || pt.size() < 2)
      throw std::runtime_error(what + ": malformed coordinate pair");
    // GeoJSON order is [lon, lat].
    const double lon = pt[0].get<double>();
    const double lat = pt[1].get<double>();
    geo::validate_coords(lat, lon);
    ring.push_back({lat, lon});
  }
  if (ring.size() < 3) throw std::runtime_error(what + ": ring has fewer than 3 vertices");
  const bool closed = std::abs(ring.front().lat - ring.back().lat) < 1e-12 &&
                      std::abs(ring.front().lon - ring.back().lon) < 1e-12;
  if (!closed) ring.push_back(ring.front());
  if (geo::detail::distinct_vertex_count(ring) < 3)
    throw std::runtime_error(what + ": ring has fewer than 3 distinct vertices");
  return ring;
}

nlohmann::json load_feature_collection(const std::string& path) {
  auto file = csv::open_input(path);
  nlohmann::json j;
  try {
    file >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  if (j.value("type", "") != "FeatureCollection" || !j.contains("features"))
    throw std::runtime_error(path + ": expected a GeoJSON FeatureCollection");
  return j;
}

}  // namespace

std::vector<MallSite> load_malls_geojson(const std::string& path) {
  const nlohmann::json j = load_feature_collection(path);
  std::vector<MallSite> malls;
  for (const auto& feat : j["features"]) {
    const auto& props = feat.at("properties");
    MallSite m;
    m.mall_id = props.at("mall_id").is_string() ? props.at("mall_id").get<std::string>()
                                                : props.at("mall_id").dump();
    m.name = props.at("name").get<std::string>();
    m.rental_sqm = props.at("rental_sqm").get<double>();
    if (!(m.rental_sqm > 0.0))
      throw std::runtime_error(path + ": mall " + m.mall_id + " has non-positive rental_sqm");
    m.polygon = parse_geojson_ring(feat.at("geometry").at("coordinates"),
                                   path + " mall " + m.mall_id);
    m.centroid = geo::ring_centroid(m.polygon);
    malls.push_back(std::move(m));
  }
  return malls;
}

std::vector<ComunaShape> load_comunas_geojson(const std::string& path) {
  const nlohmann::json j = load_feature_collection(path);
  std::vector<ComunaShape> comunas;
  for (const auto& feat : j["features"]) {
    const auto& props = feat.at("properties");
    ComunaShape c;
    c.comuna_id = props.at("comuna_id").is_string()
                      ? props.at("comuna_id").get<std::string>()
                      : props.at("comuna_id").dump();
    c.name = props.value("name", c.comuna_id);
    c.polygon = parse_geojson_ring(feat.at("geometry").at("coordinates"),
                                   path + " comuna " + c.comuna_id);
    comunas.push_back(std::move(c));
  }
  return comunas;
}

std::unordered_map<std::string, double> load_hdi(const std::string& path) {
  auto file = csv::open_input(path);
  csv::Reader reader(file, path);
  std::unordered_map<std::string, double> hdi;
  std::vector<std::string> f;
  if (reader.has_column("hdi")) {
    const std::size_t c_id = reader.column("comuna_id");
    const std::size_t c_hdi = reader.column("hdi");
    while (reader.next(f)) {
      double v = 0;
      if (!parse_f64(f.at(c_hdi), v) || !(v > 0.0 && v <= 1.0))
        throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                                 ": hdi must lie in (0,1]");
      hdi[f.at(c_id)] = v;
    }
  } else {
    const std::size_t c_id = reader.column("comuna_id");
    const std::size_t c_h = reader.column("i_health");
    const std::size_t c_e = reader.column("i_education");
    const std::size_t c_i = reader.column("i_income");
    while (reader.next(f)) {
      double h = 0, e = 0, inc = 0;
      if (!parse_f64(f.at(c_h), h) || !parse_f64(f.at(c_e), e) || !parse_f64(f.at(c_i), inc))
        throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                                 ": bad component index");
      for (double v : {h, e, inc})
        if (!(v > 0.0 && v <= 1.0))
          throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                                   ": component indices must lie in (0,1]");
      hdi[f.at(c_id)] = std::cbrt(h * e * inc);
    }
  }
  return hdi;
}

std::vector<CensusZone> load_census(const std::string& path) {
  auto file = csv::open_input(path);
  csv::Reader reader(file, path);
  const std::size_t c_id = reader.column("zone_id");
  const std::size_t c_lat = reader.column("centroid_lat");
  const std::size_t c_lon = reader.column("centroid_lon");
  const std::size_t c_pop = reader.column("population");
  std::vector<CensusZone> zones;
  std::vector<std::string> f;
  while (reader.next(f)) {
    CensusZone z;
    z.zone_id = f.at(c_id);
    if (!parse_f64(f.at(c_lat), z.centroid.lat) || !parse_f64(f.at(c_lon), z.centroid.lon) ||
        !parse_f64(f.at(c_pop), z.population))
      throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                               ": malformed census row");
    geo::validate_coords(z.centroid.lat, z.centroid.lon);
    if (z.population < 0)
      throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) +
                               ": negative population");
    zones.push_back(std::move(z));
  }
  return zones;
}

MallMappingReport map_antennas_to_malls(AntennaRegistry& registry,
                                        const std::vector<MallSite>& malls,
                                        const std::vector<std::string>& keywords) {
  std::vector<std::string> kw;
  for (const auto& k : keywords) kw.push_back(lower(k));
  std::vector<std::string> mall_names_lower;
  for (const auto& m : malls) mall_names_lower.push_back(lower(m.name));

  MallMappingReport report;
  for (auto& ant : registry.sites()) {
    const geo::LatLon pt{ant.lat, ant.lon};

    std::string geometry_mall;
    for (const auto& m : malls) {
      if (geo::point_in_polygon(pt, m.polygon)) {
        if (!geometry_mall.empty())
          throw std::runtime_error("antenna " + ant.antenna_id +
                                   " lies in two mall polygons (" + geometry_mall + ", " +
                                   m.mall_id + "); polygons must be disjoint");
        geometry_mall = m.mall_id;
      }
    }

    const std::string desc = lower(ant.description);
    bool keyword_fired = false;
    for (const auto& k : kw)
      if (!k.empty() && desc.find(k) != std::string::npos) {
        keyword_fired = true;
        break;
      }

    // The keyword method resolves its mall by the mall name appearing in
    // the description; longest name wins when several match.
    std::string keyword_mall;
    if (keyword_fired) {
      std::size_t best_len = 0;
      for (std::size_t i = 0; i < malls.size(); ++i) {
        if (!mall_names_lower[i].empty() && desc.find(mall_names_lower[i]) != std::string::npos &&
            mall_names_lower[i].size() > best_len) {
          best_len = mall_names_lower[i].size();
          keyword_mall = malls[i].mall_id;
        }
      }
    }

    const bool by_geometry = !geometry_mall.empty();
    const bool by_keyword = keyword_fired;
    if (by_geometry != by_keyword ||
        (by_geometry && !keyword_mall.empty() && keyword_mall != geometry_mall)) {
      report.disagreements.push_back(
          {ant.antenna_id, by_geometry, by_keyword, geometry_mall, keyword_mall});
    }

    if (by_geometry)
      ant.mall_id = geometry_mall;
    else if (!keyword_mall.empty())
      ant.mall_id = keyword_mall;
    else
      ant.mall_id.reset();

    if (ant.mall_id) ++report.mapped;
  }
  return report;
}

CellPopulationResult cell_populations(const std::vector<CensusZone>& zones,
                                      const std::vector<geo::CellId>& grid) {
  if (grid.empty()) throw std::invalid_argument("cell_populations: empty grid");
  CellPopulationResult result;
  std::unordered_map<geo::CellId, bool, geo::CellIdHash> in_grid;
  for (const auto& c : grid) in_grid[c] = true;

  for (const auto& z : zones) {
    const geo::CellId snapped = geo::snap_to_grid(z.centroid);
    geo::CellId target = snapped;
    if (!in_grid.count(snapped)) {
      // Nearest cell center; ties resolved by cell id ordering.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : grid) {
        const double d = geo::haversine_km(z.centroid, c.center());
        if (d < best - 1e-12 || (std::abs(d - best) <= 1e-12 && c < target)) {
          best = d;
          target = c;
        }
      }
      ++result.relocated;
    }
    result.population[target] += z.population;
  }
  return result;
}

std::optional<std::string> comuna_of_point(const geo::LatLon& pt,
                                           const std::vector<ComunaShape>& comunas) {
  for (const auto& c : comunas)
    if (geo::point_in_polygon(pt, c.polygon)) return c.comuna_id;
  return std::nullopt;
}

}  // namespace urbanflow::ingest
