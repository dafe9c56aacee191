#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "urbanflow/geo.hpp"
#include "urbanflow/ingest.hpp"
#include "urbanflow/numerics/glm.hpp"
#include "urbanflow/residence.hpp"
#include "urbanflow/visits.hpp"

namespace urbanflow::gravity {

/// One (origin cell, destination mall) observation.
struct FlowRow {
  geo::CellId cell;
  std::string mall_id;
  double flow = 0.0;        // unique home-cell visitors of the mall
  double population = 0.0;  // M_i
  double mall_sqm = 0.0;    // M_j
  double distance_km = 0.0; // D_ij, floored
  double attraction = 0.0;  // A_ij = mall mean-visitor HDI - cell HDI
  bool population_floored = false;
};

struct FlowTable {
  std::vector<FlowRow> rows;
  std::size_t populated_cells = 0;
  std::size_t malls = 0;
  std::vector<geo::CellId> floored_cells;  // zero census population, nonzero flow
};

struct FlowTableOptions {
  double distance_floor_km = 0.5;
  bool include_zero_population_cells = false;  // floored to 1 when they carry flow
};

/// F_ij = unique retained devices with home cell i and >= 1 visit to mall
/// j; zero-flow rows included for every (populated cell, mall) pair.
/// `cell_hdi` maps a cell to the HDI of the comuna containing its center;
/// mall mean-visitor HDI comes from the observed visit table.
FlowTable build_flow_table(
    const visits::VisitTable& visits, const std::vector<residence::HomeAssignment>& homes,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_population,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_hdi,
    const std::vector<ingest::MallSite>& malls, const FlowTableOptions& opts = {});

enum class AttractionTransform {
  linear,    // regressor is A_ij itself (A can be negative)
  paper_log  // regressor is -log(max(A_ij, 1e-3)), Eq.-form compatibility
};

struct GravityFit {
  numerics::FitReport report;
  std::vector<double> predicted;  // per table row, in row order
  double pearson_obs_pred = 0.0;
  double spearman_obs_pred = 0.0;
  std::optional<double> oreilly_ratio;  // gamma / beta, absent when beta = 0
  bool attraction_included = false;
  AttractionTransform transform = AttractionTransform::linear;
};

/// Poisson regression of F on [1, log M_i, log M_j, -log D]; the distance
/// regressor is negated so the fitted gamma is positive when flow decays
/// with distance.
GravityFit fit_gravity(const FlowTable& table, const numerics::GlmOptions& opts = {});

/// Adds the attraction regressor. With the linear transform the planted
/// model is exp(... + lambda * A); with paper_log it is A^(-lambda) after
/// clamping, matching the paper's written form.
GravityFit fit_gravity_augmented(const FlowTable& table,
                                 AttractionTransform transform = AttractionTransform::linear,
                                 const numerics::GlmOptions& opts = {});

struct OreillyCheck {
  double ratio = 0.0;
  bool within_range = false;  // inclusive [1.5, 2.5]
  bool defined = false;       // beta != 0
};
OreillyCheck oreilly_check(const GravityFit& fit);

/// Per-mall predicted visitor-HDI distribution: cell HDIs weighted by the
/// fitted inflow, for KDE overlays against the observed profile.
struct WeightedProfile {
  std::string mall_id;
  std::vector<double> hdi;     // one entry per origin cell
  std::vector<double> weight;  // predicted inflow from that cell
};
std::vector<WeightedProfile> predicted_profile_distribution(
    const GravityFit& fit, const FlowTable& table,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_hdi);

/// Mean HDI of each mall's unique visitors, from the observed visit table.
std::unordered_map<std::string, double> mall_mean_visitor_hdi(
    const visits::VisitTable& visits, const std::vector<residence::HomeAssignment>& homes);

}  // namespace urbanflow::gravity
