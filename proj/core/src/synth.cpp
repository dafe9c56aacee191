#include "urbanflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urbanflow/csv.hpp"
#include "urbanflow/numerics/random.hpp"

namespace urbanflow::synth {

namespace {

AttractionMode attraction_from_string(const std::string& s) {
  if (s == "none") return AttractionMode::none;
  if (s == "linear") return AttractionMode::linear;
  if (s == "paper-log") return AttractionMode::paper_log;
  throw config::ConfigError("scenario attraction mode must be none|linear|paper-log");
}

std::string attraction_to_string(AttractionMode m) {
  switch (m) {
    case AttractionMode::none: return "none";
    case AttractionMode::linear: return "linear";
    case AttractionMode::paper_log: return "paper-log";
  }
  return "none";
}

}  // namespace

Scenario Scenario::from_toml(const config::Toml& toml) {
  Scenario s;
  s.seed = static_cast<std::uint64_t>(toml.get_int("seed", static_cast<std::int64_t>(s.seed)));
  s.grid_rows = static_cast<int>(toml.get_int("grid.rows", s.grid_rows));
  s.grid_cols = static_cast<int>(toml.get_int("grid.cols", s.grid_cols));
  s.origin_lat_c = static_cast<int>(toml.get_int("grid.origin_lat_c", s.origin_lat_c));
  s.origin_lon_c = static_cast<int>(toml.get_int("grid.origin_lon_c", s.origin_lon_c));
  s.comuna_rows = static_cast<int>(toml.get_int("comunas.rows", s.comuna_rows));
  s.comuna_cols = static_cast<int>(toml.get_int("comunas.cols", s.comuna_cols));
  s.hdi_min = toml.get_double("comunas.hdi_min", s.hdi_min);
  s.hdi_max = toml.get_double("comunas.hdi_max", s.hdi_max);
  s.hdi_components = toml.get_bool("comunas.hdi_components", s.hdi_components);
  s.pop_min = toml.get_int("population.min", s.pop_min);
  s.pop_max = toml.get_int("population.max", s.pop_max);
  s.mall_count = static_cast<int>(toml.get_int("malls.count", s.mall_count));
  s.mall_sqm_min = toml.get_double("malls.sqm_min", s.mall_sqm_min);
  s.mall_sqm_max = toml.get_double("malls.sqm_max", s.mall_sqm_max);
  s.mall_halfwidth_deg = toml.get_double("malls.halfwidth_deg", s.mall_halfwidth_deg);
  s.antennas_per_mall = static_cast<int>(toml.get_int("malls.antennas", s.antennas_per_mall));
  s.alpha = toml.get_double("gravity.alpha", s.alpha);
  s.beta = toml.get_double("gravity.beta", s.beta);
  s.gamma = toml.get_double("gravity.gamma", s.gamma);
  s.lambda = toml.get_double("gravity.lambda", s.lambda);
  s.attraction = attraction_from_string(toml.get_string("gravity.attraction", "none"));
  s.gravity_g = toml.get_double("gravity.g", s.gravity_g);
  s.target_mean_flow = toml.get_double("gravity.target_mean_flow", s.target_mean_flow);
  s.distance_floor_km = toml.get_double("gravity.distance_floor_km", s.distance_floor_km);
  s.month_start = toml.get_string("events.month_start", s.month_start);
  s.days = static_cast<int>(toml.get_int("events.days", s.days));
  const std::string tz = toml.get_string("events.timezone", "-04:00");
  auto offset = timeutil::UtcOffset::parse(tz);
  if (!offset) throw config::ConfigError("scenario: invalid timezone '" + tz + "'");
  s.timezone = *offset;
  s.endpoint_reliability = toml.get_double("events.endpoint_reliability", s.endpoint_reliability);
  s.tower_fidelity = toml.get_double("events.tower_fidelity", s.tower_fidelity);
  s.visit_days_per_mall = static_cast<int>(toml.get_int("events.visit_days_per_mall",
                                                        s.visit_days_per_mall));
  s.presence_cap = static_cast<int>(toml.get_int("events.presence_cap", s.presence_cap));
  s.epoch_timestamps = toml.get_bool("events.epoch_timestamps", s.epoch_timestamps);
  s.validate();
  return s;
}

Scenario Scenario::from_file(const std::string& path) {
  return from_toml(config::Toml::parse_file(path));
}

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw config::ConfigError("scenario: " + msg); };
  if (grid_rows < 1 || grid_cols < 1) fail("grid must be at least 1x1");
  if (comuna_rows < 1 || comuna_cols < 1) fail("comuna tiling must be at least 1x1");
  if (comuna_rows > grid_rows || comuna_cols > grid_cols)
    fail("comuna tiling cannot exceed the grid");
  // Truncation toward zero makes the zero cell twice as wide; synthetic
  // grids stay strictly on one side of each axis.
  const int lat_hi = origin_lat_c + grid_rows - 1;
  const int lon_hi = origin_lon_c + grid_cols - 1;
  if (!((origin_lat_c > 0 && lat_hi > 0) || lat_hi < 0))
    fail("grid straddles or touches the equator; shift origin_lat_c");
  if (!((origin_lon_c > 0 && lon_hi > 0) || lon_hi < 0))
    fail("grid straddles or touches the prime meridian; shift origin_lon_c");
  if (std::abs(origin_lat_c) > 8800 || std::abs(lat_hi) > 8800) fail("latitude out of range");
  if (std::abs(origin_lon_c) > 17800 || std::abs(lon_hi) > 17800) fail("longitude out of range");
  if (!(hdi_min > 0 && hdi_max <= 1.0 && hdi_min < hdi_max)) fail("hdi range must be in (0,1]");
  if (pop_min < 1 || pop_max < pop_min) fail("population range invalid (min >= 1)");
  if (mall_count < 1) fail("need at least one mall");
  if (mall_count > grid_rows * grid_cols) fail("more malls than cells");
  if (!(mall_sqm_min > 0 && mall_sqm_max >= mall_sqm_min)) fail("mall size range invalid");
  if (!(mall_halfwidth_deg > 0 && mall_halfwidth_deg < 0.005))
    fail("mall_halfwidth_deg must lie in (0, 0.005) so a mall stays inside one cell");
  if (antennas_per_mall < 1) fail("antennas_per_mall must be >= 1");
  if (!(alpha > -5 && alpha < 5 && beta > -5 && beta < 5 && gamma > -50 && gamma < 50))
    fail("gravity exponents out of supported range");
  if (gravity_g < 0) fail("gravity.g must be >= 0");
  if (gravity_g == 0 && !(target_mean_flow > 0)) fail("target_mean_flow must be positive");
  if (!(distance_floor_km > 0)) fail("distance_floor_km must be positive");
  if (!timeutil::parse_date(month_start)) fail("month_start is not a valid date");
  if (days < 1 || days > 366) fail("days must lie in [1,366]");
  if (!(endpoint_reliability >= 0 && endpoint_reliability <= 1))
    fail("endpoint_reliability must lie in [0,1]");
  if (!(tower_fidelity >= 0 && tower_fidelity <= 1)) fail("tower_fidelity must lie in [0,1]");
  if (visit_days_per_mall < 1 || visit_days_per_mall > days)
    fail("visit_days_per_mall must lie in [1, days]");
  if (presence_cap < visit_days_per_mall) fail("presence_cap below visit_days_per_mall");
}

const CityCell& City::cell_at(int row, int col) const {
  return cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
               static_cast<std::size_t>(col)];
}

namespace {

std::string pad_int(long v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*ld", width, v);
  return buf;
}

geo::Ring rectangle_ring(double lat_lo, double lat_hi, double lon_lo, double lon_hi) {
  return {{lat_lo, lon_lo}, {lat_lo, lon_hi}, {lat_hi, lon_hi}, {lat_hi, lon_lo},
          {lat_lo, lon_lo}};
}

}  // namespace

City generate_city(const Scenario& sc) {
  sc.validate();
  City city;
  city.rows = sc.grid_rows;
  city.cols = sc.grid_cols;

  auto rng_comuna = numerics::make_rng(sc.seed, 1);
  auto rng_pop = numerics::make_rng(sc.seed, 2);
  auto rng_malls = numerics::make_rng(sc.seed, 3);

  // Comuna HDI values.
  std::uniform_real_distribution<double> hdi_dist(sc.hdi_min, sc.hdi_max);
  const int n_comunas = sc.comuna_rows * sc.comuna_cols;
  std::vector<double> comuna_hdi(n_comunas);
  for (auto& h : comuna_hdi) h = hdi_dist(rng_comuna);

  auto comuna_index = [&](int r, int c) {
    const int br = r * sc.comuna_rows / sc.grid_rows;
    const int bc = c * sc.comuna_cols / sc.grid_cols;
    return br * sc.comuna_cols + bc;
  };
  auto comuna_name = [](int idx) { return "C" + pad_int(idx, 3); };

  // Cells, row-major; population drawn per cell.
  std::uniform_int_distribution<long> pop_dist(sc.pop_min, sc.pop_max);
  for (int r = 0; r < sc.grid_rows; ++r) {
    for (int c = 0; c < sc.grid_cols; ++c) {
      CityCell cell;
      cell.id = geo::CellId{sc.origin_lat_c + r, sc.origin_lon_c + c};
      cell.center = cell.id.center();
      cell.population = double(pop_dist(rng_pop));
      const int ci = comuna_index(r, c);
      cell.comuna_id = comuna_name(ci);
      cell.hdi = comuna_hdi[static_cast<std::size_t>(ci)];
      city.cells.push_back(cell);
    }
  }

  // Comuna rectangles covering their block of cells.
  for (int br = 0; br < sc.comuna_rows; ++br) {
    for (int bc = 0; bc < sc.comuna_cols; ++bc) {
      // Cell rows belonging to block br: those with r*comuna_rows/grid_rows == br.
      int r_lo = sc.grid_rows, r_hi = -1, c_lo = sc.grid_cols, c_hi = -1;
      for (int r = 0; r < sc.grid_rows; ++r)
        if (r * sc.comuna_rows / sc.grid_rows == br) {
          r_lo = std::min(r_lo, r);
          r_hi = std::max(r_hi, r);
        }
      for (int c = 0; c < sc.grid_cols; ++c)
        if (c * sc.comuna_cols / sc.grid_cols == bc) {
          c_lo = std::min(c_lo, c);
          c_hi = std::max(c_hi, c);
        }
      if (r_hi < 0 || c_hi < 0) continue;

      // A negative cell id v covers (v-0.01, v]; a positive one [v, v+0.01).
      auto cell_lat_bounds = [&](int r) {
        const int v = sc.origin_lat_c + r;
        return v < 0 ? std::pair<double, double>{(v - 1) / 100.0, v / 100.0}
                     : std::pair<double, double>{v / 100.0, (v + 1) / 100.0};
      };
      auto cell_lon_bounds = [&](int c) {
        const int v = sc.origin_lon_c + c;
        return v < 0 ? std::pair<double, double>{(v - 1) / 100.0, v / 100.0}
                     : std::pair<double, double>{v / 100.0, (v + 1) / 100.0};
      };
      const double lat_lo = cell_lat_bounds(r_lo).first;
      const double lat_hi = cell_lat_bounds(r_hi).second;
      const double lon_lo = cell_lon_bounds(c_lo).first;
      const double lon_hi = cell_lon_bounds(c_hi).second;

      const int idx = br * sc.comuna_cols + bc;
      ingest::ComunaShape shape;
      shape.comuna_id = comuna_name(idx);
      shape.name = "Comuna " + pad_int(idx, 3);
      shape.polygon = rectangle_ring(lat_lo, lat_hi, lon_lo, lon_hi);
      city.comunas.push_back(std::move(shape));
      city.comuna_hdi[comuna_name(idx)] = comuna_hdi[static_cast<std::size_t>(idx)];
    }
  }

  // Malls on distinct cells (partial Fisher-Yates over cell indices).
  const int n_cells = sc.grid_rows * sc.grid_cols;
  std::vector<int> cell_order(static_cast<std::size_t>(n_cells));
  for (int i = 0; i < n_cells; ++i) cell_order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < sc.mall_count; ++i) {
    std::uniform_int_distribution<int> pick(i, n_cells - 1);
    std::swap(cell_order[static_cast<std::size_t>(i)],
              cell_order[static_cast<std::size_t>(pick(rng_malls))]);
  }
  std::vector<int> mall_cells(cell_order.begin(), cell_order.begin() + sc.mall_count);
  std::sort(mall_cells.begin(), mall_cells.end());

  std::uniform_real_distribution<double> sqm_dist(sc.mall_sqm_min, sc.mall_sqm_max);
  for (int m = 0; m < sc.mall_count; ++m) {
    const CityCell& host = city.cells[static_cast<std::size_t>(mall_cells[m])];
    ingest::MallSite mall;
    mall.mall_id = "M" + pad_int(m, 3);
    mall.name = "Mall " + mall.mall_id;
    mall.rental_sqm = std::round(sqm_dist(rng_malls));
    mall.centroid = host.center;
    const double hw = sc.mall_halfwidth_deg;
    mall.polygon = rectangle_ring(host.center.lat - hw, host.center.lat + hw,
                                  host.center.lon - hw, host.center.lon + hw);
    city.malls.push_back(std::move(mall));
  }

  // Disjointness guard (distinct host cells already guarantee it).
  for (std::size_t a = 0; a < city.malls.size(); ++a)
    for (std::size_t b = a + 1; b < city.malls.size(); ++b) {
      const auto ba = geo::bounding_box(city.malls[a].polygon);
      const auto bb = geo::bounding_box(city.malls[b].polygon);
      const bool disjoint = ba.max_lat < bb.min_lat || bb.max_lat < ba.min_lat ||
                            ba.max_lon < bb.min_lon || bb.max_lon < ba.min_lon;
      if (!disjoint)
        throw std::runtime_error("generate_city: mall polygons overlap: " +
                                 city.malls[a].mall_id + ", " + city.malls[b].mall_id);
    }

  // One home antenna + tower per cell. The antenna sits off-center, far
  // enough that it can never fall inside a co-located mall polygon, yet
  // still snaps back to its own cell.
  const double antenna_offset = (sc.mall_halfwidth_deg + 0.005) / 2.0;
  for (int i = 0; i < n_cells; ++i) {
    const CityCell& cell = city.cells[static_cast<std::size_t>(i)];
    ingest::AntennaSite a;
    a.antenna_id = "ah" + pad_int(i, 5);
    a.tower_id = "th" + pad_int(i, 5);
    a.lat = cell.center.lat + antenna_offset;
    a.lon = cell.center.lon;
    a.indoor = false;
    a.description = "residential sector " + cell.comuna_id;
    if (geo::snap_to_grid(a.lat, a.lon) != cell.id)
      throw std::runtime_error("generate_city: home antenna left its cell");
    city.antennas.add(std::move(a));
  }
  // Indoor mall antennas, one tower per mall, descriptions carrying the
  // mall name so the keyword method fires.
  for (int m = 0; m < sc.mall_count; ++m) {
    const ingest::MallSite& mall = city.malls[static_cast<std::size_t>(m)];
    for (int k = 0; k < sc.antennas_per_mall; ++k) {
      ingest::AntennaSite a;
      a.antenna_id = "am" + pad_int(m, 3) + "_" + pad_int(k, 2);
      a.tower_id = "tm" + pad_int(m, 3);
      a.lat = mall.centroid.lat;
      a.lon = mall.centroid.lon;
      a.indoor = true;
      a.description = mall.name + " level " + std::to_string(k + 1);
      city.antennas.add(std::move(a));
    }
  }
  return city;
}

namespace {

nlohmann::json geojson_polygon_feature(const geo::Ring& ring, nlohmann::json properties) {
  nlohmann::json coords = nlohmann::json::array();
  nlohmann::json outer = nlohmann::json::array();
  for (const auto& p : ring) outer.push_back({p.lon, p.lat});  // GeoJSON [lon, lat]
  coords.push_back(outer);
  return {{"type", "Feature"},
          {"properties", std::move(properties)},
          {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}};
}

std::string iso_window_end(const Scenario& sc) {
  const auto start = timeutil::parse_date(sc.month_start);
  return timeutil::format_date(
      timeutil::civil_from_days(timeutil::days_from_civil(*start) + sc.days - 1));
}

}  // namespace

void write_city_files(const Scenario& sc, const City& city, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };

  {
    auto f = csv::open_output(path("antennas.csv"));
    csv::Writer w(f);
    w.row({"antenna_id", "tower_id", "lat", "lon", "indoor", "description"});
    for (const auto& a : city.antennas.sites())
      w.row({a.antenna_id, a.tower_id, csv::format_double(a.lat), csv::format_double(a.lon),
             a.indoor ? "true" : "false", a.description});
  }

  {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& m : city.malls)
      features.push_back(geojson_polygon_feature(
          m.polygon, {{"mall_id", m.mall_id}, {"name", m.name}, {"rental_sqm", m.rental_sqm}}));
    nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", features}};
    auto f = csv::open_output(path("malls.geojson"));
    f << fc.dump(2) << '\n';
  }

  {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& c : city.comunas)
      features.push_back(geojson_polygon_feature(
          c.polygon, {{"comuna_id", c.comuna_id}, {"name", c.name}}));
    nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", features}};
    auto f = csv::open_output(path("comunas.geojson"));
    f << fc.dump(2) << '\n';
  }

  {
    auto f = csv::open_output(path("hdi.csv"));
    csv::Writer w(f);
    if (sc.hdi_components) {
      // Equal components reproduce the HDI exactly under the geometric mean.
      w.row({"comuna_id", "i_health", "i_education", "i_income"});
      for (const auto& [comuna, hdi] : city.comuna_hdi) {
        const std::string h = csv::format_double(hdi);
        w.row({comuna, h, h, h});
      }
    } else {
      w.row({"comuna_id", "hdi"});
      for (const auto& [comuna, hdi] : city.comuna_hdi)
        w.row({comuna, csv::format_double(hdi)});
    }
  }

  {
    auto f = csv::open_output(path("census.csv"));
    csv::Writer w(f);
    w.row({"zone_id", "centroid_lat", "centroid_lon", "population"});
    for (std::size_t i = 0; i < city.cells.size(); ++i) {
      const CityCell& c = city.cells[i];
      w.row({"z" + pad_int(static_cast<long>(i), 5), csv::format_double(c.center.lat),
             csv::format_double(c.center.lon), csv::format_double(c.population)});
    }
  }

  {
    // Starter pipeline config pointing at the generated inputs.
    std::ofstream f(path("pipeline.toml"));
    f << "# generated by `urbanflow synth city`\n";
    f << "seed = " << sc.seed << "\n";
    f << "timezone = \"" << sc.timezone.to_string() << "\"\n";
    f << "output_dir = \"out\"\n\n";
    f << "[inputs]\n";
    f << "events = \"events.csv\"\n";
    f << "antennas = \"antennas.csv\"\n";
    f << "malls = \"malls.geojson\"\n";
    f << "comunas = \"comunas.geojson\"\n";
    f << "hdi = \"hdi.csv\"\n";
    f << "census = \"census.csv\"\n\n";
    f << "[window]\n";
    f << "start = \"" << sc.month_start << "\"\n";
    f << "end = \"" << iso_window_end(sc) << "\"\n\n";
    f << "[thresholds]\n";
    f << "visitor_max_presences = " << sc.presence_cap << "\n";
  }
}

std::vector<std::vector<double>> expected_flows(const Scenario& sc, const City& city,
                                                double gravity_g) {
  // Pass 1: lambda-free means give each mall's implied visitor-HDI profile.
  const std::size_t n_cells = city.cells.size();
  const std::size_t n_malls = city.malls.size();
  std::vector<std::vector<double>> base(n_cells, std::vector<double>(n_malls));
  std::vector<double> profile(n_malls, 0.0);
  for (std::size_t j = 0; j < n_malls; ++j) {
    double wsum = 0.0, hsum = 0.0;
    for (std::size_t i = 0; i < n_cells; ++i) {
      const CityCell& cell = city.cells[i];
      const double d = std::max(sc.distance_floor_km,
                                geo::haversine_km(cell.center, city.malls[j].centroid));
      const double mu = std::pow(cell.population, sc.alpha) *
                        std::pow(city.malls[j].rental_sqm, sc.beta) / std::pow(d, sc.gamma);
      base[i][j] = mu;
      wsum += mu;
      hsum += mu * cell.hdi;
    }
    profile[j] = wsum > 0 ? hsum / wsum : 0.0;
  }

  std::vector<std::vector<double>> mu(n_cells, std::vector<double>(n_malls));
  for (std::size_t i = 0; i < n_cells; ++i) {
    for (std::size_t j = 0; j < n_malls; ++j) {
      double attr = 1.0;
      const double a = profile[j] - city.cells[i].hdi;
      switch (sc.attraction) {
        case AttractionMode::none: break;
        case AttractionMode::linear: attr = std::exp(sc.lambda * a); break;
        case AttractionMode::paper_log: attr = std::pow(std::max(a, 1e-3), -sc.lambda); break;
      }
      mu[i][j] = gravity_g * base[i][j] * attr;
    }
  }
  return mu;
}

double derive_gravity_g(const Scenario& sc, const City& city) {
  const auto mu = expected_flows(sc, city, 1.0);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& row : mu)
    for (double v : row) {
      total += v;
      ++n;
    }
  if (total <= 0) throw std::runtime_error("derive_gravity_g: degenerate expected flows");
  return sc.target_mean_flow * double(n) / total;
}

namespace {

struct EventWriter {
  std::ofstream file;
  const Scenario& sc;
  std::int64_t start_day;
  std::size_t count = 0;
  std::string buf;

  EventWriter(const std::string& p, const Scenario& s)
      : file(p), sc(s),
        start_day(timeutil::days_from_civil(*timeutil::parse_date(s.month_start))) {
    if (!file) throw std::runtime_error("cannot open output file: " + p);
    file << "device_id,timestamp,antenna_id,bytes_down,bytes_up\n";
    buf.reserve(1 << 16);
  }

  void emit(const std::string& device, int day, int seconds_of_day,
            const std::string& antenna, long down, long up) {
    const std::int64_t epoch =
        (start_day + day) * 86400 + seconds_of_day - sc.timezone.seconds;
    buf += device;
    buf += ',';
    if (sc.epoch_timestamps)
      buf += std::to_string(epoch);
    else
      buf += timeutil::format_iso8601(epoch, sc.timezone);
    buf += ',';
    buf += antenna;
    buf += ',';
    buf += std::to_string(down);
    buf += ',';
    buf += std::to_string(up);
    buf += '\n';
    ++count;
    if (buf.size() > (1 << 15)) {
      file << buf;
      buf.clear();
    }
  }

  void flush() {
    file << buf;
    buf.clear();
    file.flush();
  }
};

std::string device_name(const geo::CellId& cell, std::size_t idx) {
  return "d" + std::to_string(cell.lat_c) + "_" + std::to_string(cell.lon_c) + "_" +
         pad_int(static_cast<long>(idx), 5);
}

}  // namespace

TraceManifest generate_traces(const Scenario& sc, const City& city, const std::string& dir) {
  sc.validate();
  std::filesystem::create_directories(dir);

  const double g = sc.gravity_g > 0 ? sc.gravity_g : derive_gravity_g(sc, city);
  const auto mu = expected_flows(sc, city, g);
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < mu[i].size(); ++j)
      if (mu[i][j] > 1e7)
        throw std::runtime_error(
            "generate_traces: expected flow exceeds 1e7 for cell " +
            std::to_string(city.cells[i].id.lat_c) + "," +
            std::to_string(city.cells[i].id.lon_c) + " and mall " + city.malls[j].mall_id +
            "; reduce gravity.g or gravity.target_mean_flow");

  TraceManifest manifest;
  manifest.gravity_g = g;

  // Record the planted per-mall profile for the manifest.
  {
    const std::size_t n_cells = city.cells.size();
    for (std::size_t j = 0; j < city.malls.size(); ++j) {
      double wsum = 0.0, hsum = 0.0;
      for (std::size_t i = 0; i < n_cells; ++i) {
        const CityCell& cell = city.cells[i];
        const double d = std::max(sc.distance_floor_km,
                                  geo::haversine_km(cell.center, city.malls[j].centroid));
        const double m0 = std::pow(cell.population, sc.alpha) *
                          std::pow(city.malls[j].rental_sqm, sc.beta) / std::pow(d, sc.gamma);
        wsum += m0;
        hsum += m0 * cell.hdi;
      }
      manifest.mall_profile_hdi[city.malls[j].mall_id] = wsum > 0 ? hsum / wsum : 0.0;
    }
  }

  EventWriter writer((std::filesystem::path(dir) / "events.csv").string(), sc);

  const int n_cells = static_cast<int>(city.cells.size());
  const int n_malls = static_cast<int>(city.malls.size());
  const int other_cells = n_cells - 1;

  for (int ci = 0; ci < n_cells; ++ci) {
    const CityCell& cell = city.cells[static_cast<std::size_t>(ci)];
    auto rng = numerics::make_rng(sc.seed, 1000 + static_cast<std::uint64_t>(ci));

    // Per-mall visitor demand and capacity-constrained device selection: a
    // device accrues visit_days_per_mall presences per selected mall and
    // stays eligible while presences stay under the cap, so no planted
    // visitor is ever removed by the non-visitor filter.
    std::vector<int> presences;                 // per device
    std::vector<std::vector<int>> device_malls;  // per device, mall indices
    for (int mj = 0; mj < n_malls; ++mj) {
      std::poisson_distribution<long> demand(mu[static_cast<std::size_t>(ci)]
                                               [static_cast<std::size_t>(mj)]);
      long need = demand(rng);
      if (need <= 0) continue;
      manifest.realized_flows[{cell.id, city.malls[static_cast<std::size_t>(mj)].mall_id}] =
          need;

      std::vector<int> eligible;
      for (std::size_t d = 0; d < presences.size(); ++d)
        if (presences[d] + sc.visit_days_per_mall <= sc.presence_cap)
          eligible.push_back(static_cast<int>(d));
      while (eligible.size() < static_cast<std::size_t>(need)) {
        eligible.push_back(static_cast<int>(presences.size()));
        presences.push_back(0);
        device_malls.emplace_back();
      }
      // Partial Fisher-Yates over the eligible list.
      for (long pick = 0; pick < need; ++pick) {
        std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(pick),
                                                     eligible.size() - 1);
        std::swap(eligible[static_cast<std::size_t>(pick)], eligible[u(rng)]);
        const int dev = eligible[static_cast<std::size_t>(pick)];
        presences[static_cast<std::size_t>(dev)] += sc.visit_days_per_mall;
        device_malls[static_cast<std::size_t>(dev)].push_back(mj);
      }
    }

    // Event emission per device: home endpoints for every day, then mall
    // visits on sampled days.
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> morning_sod(5 * 3600, 8 * 3600 - 1);
    std::uniform_int_distribution<int> evening_sod(22 * 3600 + 1, 24 * 3600 - 1);
    std::uniform_int_distribution<int> visit_sod(10 * 3600, 21 * 3600);
    std::uniform_int_distribution<long> bytes(0, 500000);

    const std::string home_antenna = "ah" + pad_int(ci, 5);
    for (std::size_t d = 0; d < presences.size(); ++d) {
      const std::string device = device_name(cell.id, d);
      manifest.device_home[device] = cell.id;
      ++manifest.device_count;

      auto endpoint_antenna = [&]() -> std::string {
        if (other_cells == 0 || coin(rng) < sc.tower_fidelity) return home_antenna;
        std::uniform_int_distribution<int> pick(0, other_cells - 1);
        int other = pick(rng);
        if (other >= ci) ++other;  // skip the home cell
        return "ah" + pad_int(other, 5);
      };

      for (int day = 0; day < sc.days; ++day) {
        if (coin(rng) >= sc.endpoint_reliability) continue;
        writer.emit(device, day, morning_sod(rng), endpoint_antenna(), bytes(rng), bytes(rng));
        writer.emit(device, day, evening_sod(rng), endpoint_antenna(), bytes(rng), bytes(rng));
      }

      for (int mj : device_malls[d]) {
        // Distinct visit days for this (device, mall).
        std::vector<int> days(static_cast<std::size_t>(sc.days));
        for (int k = 0; k < sc.days; ++k) days[static_cast<std::size_t>(k)] = k;
        for (int k = 0; k < sc.visit_days_per_mall; ++k) {
          std::uniform_int_distribution<int> u(k, sc.days - 1);
          std::swap(days[static_cast<std::size_t>(k)], days[static_cast<std::size_t>(u(rng))]);
        }
        std::sort(days.begin(), days.begin() + sc.visit_days_per_mall);
        std::uniform_int_distribution<int> antenna_pick(0, sc.antennas_per_mall - 1);
        for (int k = 0; k < sc.visit_days_per_mall; ++k) {
          const int day = days[static_cast<std::size_t>(k)];
          const std::string antenna = "am" + pad_int(mj, 3) + "_" +
                                      pad_int(antenna_pick(rng), 2);
          // Two same-day events exercise (device, mall, day) deduplication.
          writer.emit(device, day, visit_sod(rng), antenna, bytes(rng), bytes(rng));
          writer.emit(device, day, visit_sod(rng), antenna, bytes(rng), bytes(rng));
        }
      }
    }
  }

  writer.flush();
  manifest.event_count = writer.count;

  // Manifest JSON: scenario echo plus realized truths.
  nlohmann::json j;
  j["scenario"] = {
      {"seed", sc.seed},
      {"grid", {{"rows", sc.grid_rows}, {"cols", sc.grid_cols},
                {"origin_lat_c", sc.origin_lat_c}, {"origin_lon_c", sc.origin_lon_c}}},
      {"comunas", {{"rows", sc.comuna_rows}, {"cols", sc.comuna_cols},
                   {"hdi_min", sc.hdi_min}, {"hdi_max", sc.hdi_max}}},
      {"population", {{"min", sc.pop_min}, {"max", sc.pop_max}}},
      {"malls", {{"count", sc.mall_count}, {"sqm_min", sc.mall_sqm_min},
                 {"sqm_max", sc.mall_sqm_max}, {"antennas", sc.antennas_per_mall}}},
      {"gravity", {{"alpha", sc.alpha}, {"beta", sc.beta}, {"gamma", sc.gamma},
                   {"lambda", sc.lambda}, {"attraction", attraction_to_string(sc.attraction)},
                   {"g", g}, {"distance_floor_km", sc.distance_floor_km}}},
      {"events", {{"month_start", sc.month_start}, {"days", sc.days},
                  {"timezone", sc.timezone.to_string()},
                  {"endpoint_reliability", sc.endpoint_reliability},
                  {"tower_fidelity", sc.tower_fidelity},
                  {"visit_days_per_mall", sc.visit_days_per_mall},
                  {"presence_cap", sc.presence_cap},
                  {"epoch_timestamps", sc.epoch_timestamps}}}};
  j["device_count"] = manifest.device_count;
  j["event_count"] = manifest.event_count;
  j["mall_profile_hdi"] = manifest.mall_profile_hdi;

  nlohmann::json flows = nlohmann::json::array();
  for (const auto& [key, f] : manifest.realized_flows)
    flows.push_back({{"cell_lat_c", key.first.lat_c}, {"cell_lon_c", key.first.lon_c},
                     {"mall_id", key.second}, {"flow", f}});
  j["realized_flows"] = flows;

  nlohmann::json homes = nlohmann::json::object();
  for (const auto& [device, cell] : manifest.device_home)
    homes[device] = {{"lat_c", cell.lat_c}, {"lon_c", cell.lon_c}};
  j["device_home"] = homes;

  std::ofstream mf((std::filesystem::path(dir) / "manifest.json").string());
  if (!mf) throw std::runtime_error("cannot write manifest.json in " + dir);
  mf << j.dump(2) << '\n';
  return manifest;
}

}  // namespace urbanflow::synth
