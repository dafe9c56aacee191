#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "urbanflow/config.hpp"
#include "urbanflow/geo.hpp"
#include "urbanflow/gravity.hpp"
#include "urbanflow/ingest.hpp"
#include "urbanflow/timeutil.hpp"

namespace urbanflow::synth {

enum class AttractionMode { none, linear, paper_log };

/// Planted ground truth for a synthetic city and its event stream. The seed
/// fully determines every output byte.
struct Scenario {
  std::uint64_t seed = 42;

  // Grid: rows x cols of two-decimal cells anchored at the south-west
  // corner, expressed in centi-degrees. The grid must not straddle the
  // equator or the antimeridian.
  int grid_rows = 20;
  int grid_cols = 20;
  int origin_lat_c = -3360;  // -33.60
  int origin_lon_c = -7080;  // -70.80

  // Comunas tile the grid in comuna_rows x comuna_cols rectangular blocks.
  int comuna_rows = 4;
  int comuna_cols = 4;
  double hdi_min = 0.65;
  double hdi_max = 0.98;
  bool hdi_components = false;  // emit i_health/i_education/i_income columns

  long pop_min = 500;
  long pop_max = 5000;

  int mall_count = 16;
  double mall_sqm_min = 20000;
  double mall_sqm_max = 170000;
  double mall_halfwidth_deg = 0.002;  // polygon half-size, keeps malls inside a cell
  int antennas_per_mall = 2;

  // Gravity truth. G <= 0 means "derive from target_mean_flow".
  double alpha = 0.52;
  double beta = 0.49;
  double gamma = 1.16;
  double lambda = 0.0;
  AttractionMode attraction = AttractionMode::none;
  double gravity_g = 0.0;
  double target_mean_flow = 30.0;
  double distance_floor_km = 0.5;

  // Routine / event model.
  std::string month_start = "2016-08-01";
  int days = 28;
  timeutil::UtcOffset timezone{-4 * 3600};
  double endpoint_reliability = 1.0;  // per-day probability of home events
  double tower_fidelity = 1.0;        // per-endpoint probability of the true home tower
  int visit_days_per_mall = 1;
  int presence_cap = 10;   // keeps planted visitors under the non-visitor filter
  bool epoch_timestamps = false;

  static Scenario from_toml(const config::Toml& toml);
  static Scenario from_file(const std::string& path);
  void validate() const;
};

struct CityCell {
  geo::CellId id;
  geo::LatLon center;
  double population = 0.0;
  std::string comuna_id;
  double hdi = 0.0;
};

struct City {
  std::vector<CityCell> cells;  // row-major grid order
  std::vector<ingest::MallSite> malls;
  std::vector<ingest::ComunaShape> comunas;
  std::map<std::string, double> comuna_hdi;
  ingest::AntennaRegistry antennas;  // one home antenna per cell + mall antennas

  const CityCell& cell_at(int row, int col) const;
  int rows = 0;
  int cols = 0;
};

/// Deterministic city construction; throws when mall polygons would
/// overlap or the grid straddles a sign change.
City generate_city(const Scenario& scenario);

/// Write antennas.csv, malls.geojson, comunas.geojson, hdi.csv, census.csv
/// and a starter pipeline.toml into `dir` (created if needed).
void write_city_files(const Scenario& scenario, const City& city, const std::string& dir);

/// Ground truth recorded by generate_traces.
struct TraceManifest {
  double gravity_g = 0.0;  // the G actually used
  std::size_t device_count = 0;
  std::size_t event_count = 0;
  /// Realized unique-visitor flow per (cell, mall), sampling included.
  std::map<std::pair<geo::CellId, std::string>, long> realized_flows;
  /// Planted per-mall mean-visitor HDI used by the attraction term.
  std::map<std::string, double> mall_profile_hdi;
  /// Planted home cell per device id.
  std::map<std::string, geo::CellId> device_home;
};

/// Generate the event stream into `dir`/events.csv and write
/// `dir`/manifest.json echoing the scenario plus every realized truth.
TraceManifest generate_traces(const Scenario& scenario, const City& city,
                              const std::string& dir);

/// Expected flow matrix under the planted parameters (cells x malls).
std::vector<std::vector<double>> expected_flows(const Scenario& scenario, const City& city,
                                                double gravity_g);

/// The G that makes the mean expected flow hit target_mean_flow.
double derive_gravity_g(const Scenario& scenario, const City& city);

}  // namespace urbanflow::synth
