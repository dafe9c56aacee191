#include "urbanflow/gravity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "urbanflow/numerics/stats.hpp"

namespace urbanflow::gravity {

std::unordered_map<std::string, double> mall_mean_visitor_hdi(
    const visits::VisitTable& visits, const std::vector<residence::HomeAssignment>& homes) {
  std::unordered_map<std::string, double> hdi_of;
  for (const auto& h : homes) hdi_of[h.device_id] = h.hdi;

  std::unordered_map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& [device, malls] : visits.by_device()) {
    auto it = hdi_of.find(device);
    if (it == hdi_of.end()) continue;
    for (const auto& [mall, days] : malls) {
      auto& a = acc[mall];
      a.first += it->second;  // unique visitor: one contribution per mall
      a.second += 1;
    }
  }
  std::unordered_map<std::string, double> out;
  for (const auto& [mall, a] : acc) out[mall] = a.first / double(a.second);
  return out;
}

FlowTable build_flow_table(
    const visits::VisitTable& visits, const std::vector<residence::HomeAssignment>& homes,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_population,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_hdi,
    const std::vector<ingest::MallSite>& malls, const FlowTableOptions& opts) {
  if (malls.empty()) throw std::invalid_argument("build_flow_table: no malls");

  std::unordered_map<std::string, const residence::HomeAssignment*> home_of;
  for (const auto& h : homes) home_of[h.device_id] = &h;

  // Observed unique-device flows per (cell, mall).
  std::map<std::pair<geo::CellId, std::string>, double> flow;
  std::set<geo::CellId> flow_cells;
  for (const auto& [device, device_malls] : visits.by_device()) {
    auto it = home_of.find(device);
    if (it == home_of.end()) continue;
    const geo::CellId cell = it->second->home_cell_id;
    flow_cells.insert(cell);
    for (const auto& [mall, days] : device_malls) flow[{cell, mall}] += 1.0;
  }

  const auto mall_hdi = mall_mean_visitor_hdi(visits, homes);

  // Cell universe: populated census cells, plus flow-carrying cells with a
  // population floor of 1 (kept so their likelihood contribution survives).
  std::set<geo::CellId> cells;
  for (const auto& [cell, pop] : cell_population)
    if (pop > 0 || opts.include_zero_population_cells) cells.insert(cell);

  FlowTable table;
  for (const auto& cell : flow_cells) {
    const auto it = cell_population.find(cell);
    const double pop = it == cell_population.end() ? 0.0 : it->second;
    if (pop <= 0 && !cells.count(cell)) {
      cells.insert(cell);
      table.floored_cells.push_back(cell);
    }
  }

  table.populated_cells = cells.size();
  table.malls = malls.size();
  table.rows.reserve(cells.size() * malls.size());

  for (const auto& cell : cells) {
    const auto pit = cell_population.find(cell);
    double pop = pit == cell_population.end() ? 0.0 : pit->second;
    bool floored = false;
    if (pop <= 0) {
      pop = 1.0;
      floored = true;
    }
    const auto hit = cell_hdi.find(cell);
    const double hdi_i = hit == cell_hdi.end() ? 0.0 : hit->second;
    const geo::LatLon center = cell.center();

    for (const auto& mall : malls) {
      FlowRow row;
      row.cell = cell;
      row.mall_id = mall.mall_id;
      auto fit = flow.find({cell, mall.mall_id});
      row.flow = fit == flow.end() ? 0.0 : fit->second;
      row.population = pop;
      row.population_floored = floored;
      row.mall_sqm = mall.rental_sqm;
      row.distance_km =
          std::max(opts.distance_floor_km, geo::haversine_km(center, mall.centroid));
      auto mh = mall_hdi.find(mall.mall_id);
      row.attraction = (mh == mall_hdi.end() ? 0.0 : mh->second) - hdi_i;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

namespace {

GravityFit fit_impl(const FlowTable& table, bool with_attraction,
                    AttractionTransform transform, const numerics::GlmOptions& opts) {
  if (table.rows.size() < 4)
    throw std::invalid_argument("fit_gravity: need at least 4 rows");

  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index p = with_attraction ? 5 : 4;
  numerics::DesignMatrix d;
  d.X.resize(n, p);
  d.y.resize(n);
  d.names = {"logG", "alpha", "beta", "gamma"};
  if (with_attraction) d.names.push_back("lambda");

  std::vector<std::size_t> bad_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    const FlowRow& r = table.rows[static_cast<std::size_t>(i)];
    d.X(i, 0) = 1.0;
    d.X(i, 1) = std::log(r.population);
    d.X(i, 2) = std::log(r.mall_sqm);
    d.X(i, 3) = -std::log(r.distance_km);  // fitted gamma positive under decay
    if (with_attraction) {
      double a;
      switch (transform) {
        case AttractionTransform::linear:
          a = r.attraction;
          break;
        case AttractionTransform::paper_log:
          a = -std::log(std::max(r.attraction, 1e-3));
          break;
        default:
          throw std::invalid_argument("fit_gravity: unknown attraction transform");
      }
      if (!std::isfinite(a)) bad_rows.push_back(static_cast<std::size_t>(i));
      d.X(i, 4) = a;
    }
    d.y[i] = r.flow;
  }
  if (!bad_rows.empty()) {
    std::string msg = "fit_gravity: attraction transform undefined on rows:";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad_rows.size(), 20); ++i)
      msg += " " + std::to_string(bad_rows[i]);
    if (bad_rows.size() > 20) msg += " ...";
    throw std::invalid_argument(msg);
  }

  GravityFit fit;
  fit.attraction_included = with_attraction;
  fit.transform = transform;
  fit.report = numerics::poisson_irls(d, opts);

  const Eigen::VectorXd mu = (d.X * fit.report.coef).array().exp();
  fit.predicted.assign(mu.data(), mu.data() + mu.size());

  std::vector<double> obs(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) obs[i] = table.rows[i].flow;
  fit.pearson_obs_pred = numerics::pearson(obs, fit.predicted);
  fit.spearman_obs_pred = numerics::spearman(obs, fit.predicted);

  const double beta = fit.report.coefficient("beta");
  const double gamma = fit.report.coefficient("gamma");
  if (beta != 0.0) fit.oreilly_ratio = gamma / beta;
  return fit;
}

}  // namespace

GravityFit fit_gravity(const FlowTable& table, const numerics::GlmOptions& opts) {
  return fit_impl(table, false, AttractionTransform::linear, opts);
}

GravityFit fit_gravity_augmented(const FlowTable& table, AttractionTransform transform,
                                 const numerics::GlmOptions& opts) {
  return fit_impl(table, true, transform, opts);
}

OreillyCheck oreilly_check(const GravityFit& fit) {
  OreillyCheck check;
  if (!fit.oreilly_ratio) return check;
  check.defined = true;
  check.ratio = *fit.oreilly_ratio;
  check.within_range = check.ratio >= 1.5 && check.ratio <= 2.5;
  return check;
}

std::vector<WeightedProfile> predicted_profile_distribution(
    const GravityFit& fit, const FlowTable& table,
    const std::unordered_map<geo::CellId, double, geo::CellIdHash>& cell_hdi) {
  if (fit.predicted.size() != table.rows.size())
    throw std::invalid_argument("predicted_profile_distribution: fit does not match table");

  std::map<std::string, WeightedProfile> by_mall;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const FlowRow& r = table.rows[i];
    auto hit = cell_hdi.find(r.cell);
    if (hit == cell_hdi.end()) continue;
    auto& profile = by_mall[r.mall_id];
    profile.mall_id = r.mall_id;
    profile.hdi.push_back(hit->second);
    profile.weight.push_back(fit.predicted[i]);
  }
  std::vector<WeightedProfile> out;
  out.reserve(by_mall.size());
  for (auto& [mall, profile] : by_mall) out.push_back(std::move(profile));
  return out;
}

}  // namespace urbanflow::gravity
