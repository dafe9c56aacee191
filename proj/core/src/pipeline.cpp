#include "urbanflow/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "urbanflow/covisit.hpp"
#include "urbanflow/csv.hpp"
#include "urbanflow/geo.hpp"
#include "urbanflow/gravity.hpp"
#include "urbanflow/ingest.hpp"
#include "urbanflow/jsonlog.hpp"
#include "urbanflow/mixing.hpp"
#include "urbanflow/numerics/stats.hpp"
#include "urbanflow/report.hpp"
#include "urbanflow/residence.hpp"
#include "urbanflow/synth.hpp"
#include "urbanflow/timeutil.hpp"
#include "urbanflow/visits.hpp"

namespace urbanflow::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "urbanflow 0.1.0";

double parse_double_or_throw(const std::string& s, const std::string& what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("malformed number in " + what + ": '" + s + "'");
  return v;
}

long parse_long_or_throw(const std::string& s, const std::string& what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("malformed integer in " + what + ": '" + s + "'");
  return v;
}

/// Everything that can influence stage outputs, canonically serialized.
std::string config_fingerprint(const config::PipelineConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "tz=" << c.timezone.seconds << ";start=" << timeutil::format_date(c.window_start)
      << ";end=" << timeutil::format_date(c.window_end)
      << ";maxpres=" << c.visitor_max_presences << ";cov=" << c.day_coverage
      << ";share=" << c.tower_share << ";covth=" << c.covisit_threshold
      << ";floor=" << c.distance_floor_km << ";q=" << c.quantiles
      << ";B=" << c.bootstrap_resamples << ";seed=" << (c.seed ? std::to_string(*c.seed) : "-")
      << ";attr=" << (c.attraction_transform == gravity::AttractionTransform::linear
                          ? "linear"
                          : "paper-log")
      << ";sim="
      << (c.similarity_mode == covisit::SimilarityMode::similarity ? "similarity" : "distance")
      << ";pairs=" << (c.covisit_pairs == covisit::PairSelection::all ? "all" : "thresholded")
      << ";k=" << c.cluster_count << ";kw=";
  for (const auto& k : c.mall_keywords) out << k << ",";
  return out.str();
}

/// Content-addressed stage stamp: the stage re-runs only when its config
/// fingerprint or any input file changes.
class StageGuard {
 public:
  StageGuard(const config::PipelineConfig& cfg, std::string stage,
             std::vector<std::string> input_paths)
      : cfg_(cfg), stage_(std::move(stage)), inputs_(std::move(input_paths)) {
    std::uint64_t h = fnv1a(config_fingerprint(cfg));
    h = fnv1a(hash_hex(h) + "|" + stage_);
    for (const auto& p : inputs_) {
      input_hashes_.push_back(hash_hex(fnv1a_file(p)));
      h = fnv1a(hash_hex(h) + "|" + p + "=" + input_hashes_.back());
    }
    stamp_ = hash_hex(h);
  }

  bool up_to_date() const {
    const fs::path mpath = manifest_path();
    if (!fs::exists(mpath)) return false;
    json m;
    try {
      std::ifstream f(mpath);
      f >> m;
    } catch (...) {
      return false;
    }
    if (m.value("stamp", "") != stamp_) return false;
    for (const auto& out : m.value("outputs", std::vector<std::string>{}))
      if (!fs::exists(fs::path(cfg_.output_dir) / out)) return false;
    return true;
  }

  StageResult skip() const {
    jsonlog::info("stage up to date").field("stage", stage_);
    StageResult r;
    r.stage = stage_;
    r.skipped = true;
    return r;
  }

  /// Writes the run manifest; `outputs` are paths relative to output_dir.
  StageResult finish(const std::vector<std::string>& outputs) const {
    fs::create_directories(fs::path(cfg_.output_dir) / "manifests");
    json m;
    m["stage"] = stage_;
    m["stamp"] = stamp_;
    m["config"] = hash_hex(fnv1a(config_fingerprint(cfg_)));
    json in = json::object();
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      in[fs::path(inputs_[i]).filename().string()] = input_hashes_[i];
    m["inputs"] = in;
    m["outputs"] = outputs;
    m["version"] = kVersion;
    std::ofstream f(manifest_path());
    f << m.dump(2) << '\n';

    StageResult r;
    r.stage = stage_;
    for (const auto& o : outputs)
      r.outputs.push_back((fs::path(cfg_.output_dir) / o).string());
    jsonlog::info("stage complete").field("stage", stage_).field("outputs", outputs.size());
    return r;
  }

 private:
  fs::path manifest_path() const {
    return fs::path(cfg_.output_dir) / "manifests" / (stage_ + ".json");
  }
  const config::PipelineConfig& cfg_;
  std::string stage_;
  std::vector<std::string> inputs_;
  std::vector<std::string> input_hashes_;
  std::string stamp_;
};

void require_input(const std::string& path, const std::string& what,
                   const std::string& hint) {
  if (path.empty() || !fs::exists(path))
    throw config::ConfigError("missing input " + what + " (" +
                              (path.empty() ? "not configured" : path) + "); " + hint);
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw MissingArtifactError("missing artifact " + path.string() + "; run `" + producer +
                               "` first");
}

std::ofstream out_file(const config::PipelineConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return csv::open_output((fs::path(cfg.output_dir) / name).string());
}

struct CityInputs {
  ingest::AntennaRegistry antennas;
  std::vector<ingest::MallSite> malls;
  std::vector<ingest::ComunaShape> comunas;
  std::unordered_map<std::string, double> comuna_hdi;
  std::vector<ingest::CensusZone> census;
  ingest::MallMappingReport mapping;
};

CityInputs load_city_inputs(const config::PipelineConfig& cfg, bool need_census) {
  require_input(cfg.antennas_path, "antennas", "set inputs.antennas in the config");
  require_input(cfg.malls_path, "malls", "set inputs.malls in the config");
  require_input(cfg.comunas_path, "comunas", "set inputs.comunas in the config");
  require_input(cfg.hdi_path, "hdi", "set inputs.hdi in the config");
  if (need_census)
    require_input(cfg.census_path, "census", "set inputs.census in the config");

  CityInputs in;
  in.antennas = ingest::load_antennas(cfg.antennas_path);
  in.malls = ingest::load_malls_geojson(cfg.malls_path);
  in.comunas = ingest::load_comunas_geojson(cfg.comunas_path);
  in.comuna_hdi = ingest::load_hdi(cfg.hdi_path);
  if (need_census) in.census = ingest::load_census(cfg.census_path);
  in.mapping = ingest::map_antennas_to_malls(in.antennas, in.malls, cfg.mall_keywords);
  return in;
}

struct Window {
  std::int64_t start_day;
  std::int64_t end_day;
  bool contains(std::int64_t day) const { return day >= start_day && day <= end_day; }
};

Window window_of(const config::PipelineConfig& cfg) {
  return {timeutil::days_from_civil(cfg.window_start),
          timeutil::days_from_civil(cfg.window_end)};
}

/// Stream the events file through a sink, checking readability first.
ingest::ParseStats stream_events(const config::PipelineConfig& cfg,
                                 const ingest::AntennaRegistry& registry,
                                 const std::function<void(const ingest::EventRecord&)>& sink) {
  require_input(cfg.events_path, "events",
                "set inputs.events in the config (or run `urbanflow synth traces`)");
  auto f = csv::open_input(cfg.events_path);
  return ingest::parse_events(f, registry, sink, cfg.events_path);
}

std::vector<residence::HomeAssignment> load_homes_csv(const config::PipelineConfig& cfg) {
  const fs::path path = fs::path(cfg.output_dir) / "homes.csv";
  require_artifact(path, "urbanflow homes");
  auto f = csv::open_input(path.string());
  csv::Reader reader(f, path.string());
  const auto c_dev = reader.column("device_id");
  const auto c_ant = reader.column("home_antenna_id");
  const auto c_lat = reader.column("home_cell_lat");
  const auto c_lon = reader.column("home_cell_lon");
  const auto c_com = reader.column("comuna_id");
  const auto c_hdi = reader.column("hdi");
  const auto c_days = reader.column("days_observed");
  const auto c_share = reader.column("top_tower_share");

  std::vector<residence::HomeAssignment> homes;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    residence::HomeAssignment h;
    h.device_id = fields.at(c_dev);
    h.home_antenna_id = fields.at(c_ant);
    h.home_cell_id = geo::snap_to_grid(parse_double_or_throw(fields.at(c_lat), "homes.csv"),
                                       parse_double_or_throw(fields.at(c_lon), "homes.csv"));
    h.comuna_id = fields.at(c_com);
    h.hdi = parse_double_or_throw(fields.at(c_hdi), "homes.csv");
    h.days_observed = static_cast<int>(parse_long_or_throw(fields.at(c_days), "homes.csv"));
    h.top_tower_share = parse_double_or_throw(fields.at(c_share), "homes.csv");
    homes.push_back(std::move(h));
  }
  return homes;
}

visits::VisitTable load_visits_csv(const config::PipelineConfig& cfg) {
  const fs::path path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(path, "urbanflow visits");
  auto f = csv::open_input(path.string());
  csv::Reader reader(f, path.string());
  const auto c_dev = reader.column("device_id");
  const auto c_mall = reader.column("mall_id");
  const auto c_day = reader.column("day");

  visits::VisitTable table;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    auto date = timeutil::parse_date(fields.at(c_day));
    if (!date) throw std::runtime_error("visits.csv: bad date '" + fields.at(c_day) + "'");
    table.add(fields.at(c_dev), fields.at(c_mall), timeutil::days_from_civil(*date));
  }
  return table;
}

/// HDI of the comuna containing each mall's centroid.
std::unordered_map<std::string, double> mall_location_hdi(const CityInputs& in) {
  std::unordered_map<std::string, double> out;
  for (const auto& m : in.malls) {
    auto comuna = ingest::comuna_of_point(m.centroid, in.comunas);
    if (!comuna) continue;
    auto it = in.comuna_hdi.find(*comuna);
    if (it != in.comuna_hdi.end()) out[m.mall_id] = it->second;
  }
  return out;
}

json fit_report_json(const numerics::FitReport& rep) { return json::parse(rep.to_json()); }

void throw_if_not_converged(const numerics::FitReport& rep, const std::string& what) {
  if (!rep.converged)
    throw NonConvergenceError(what + " did not converge after " +
                              std::to_string(rep.iterations) + " iterations" +
                              (rep.separation ? " (separation detected)" : ""));
}

}  // namespace

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return 0;
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    const std::streamsize n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!f) break;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StageResult run_ingest(const config::PipelineConfig& cfg) {
  require_input(cfg.events_path, "events",
                "set inputs.events in the config (or run `urbanflow synth traces`)");
  StageGuard guard(cfg, "ingest",
                   {cfg.events_path, cfg.antennas_path, cfg.malls_path, cfg.comunas_path,
                    cfg.hdi_path, cfg.census_path});
  if (guard.up_to_date()) return guard.skip();

  CityInputs in = load_city_inputs(cfg, true);
  std::size_t count = 0;
  ingest::ParseStats stats =
      stream_events(cfg, in.antennas, [&](const ingest::EventRecord&) { ++count; });

  json rep;
  rep["events_emitted"] = stats.emitted;
  rep["events_rejected"] = stats.rejected;
  rep["rejection_reasons"] = stats.reason_counts;
  json samples = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(stats.rejections.size(), 50); ++i)
    samples.push_back(
        {{"line", stats.rejections[i].line}, {"reason", stats.rejections[i].reason}});
  rep["rejection_samples"] = samples;
  rep["antennas"] = in.antennas.size();
  rep["antennas_mapped_to_malls"] = in.mapping.mapped;
  json disagreements = json::array();
  for (const auto& d : in.mapping.disagreements)
    disagreements.push_back({{"antenna_id", d.antenna_id},
                             {"by_geometry", d.matched_by_geometry},
                             {"by_keyword", d.matched_by_keyword},
                             {"geometry_mall", d.geometry_mall},
                             {"keyword_mall", d.keyword_mall}});
  rep["mapping_disagreements"] = disagreements;
  rep["malls"] = in.malls.size();
  rep["comunas"] = in.comunas.size();
  rep["census_zones"] = in.census.size();

  auto f = out_file(cfg, "ingest_report.json");
  f << rep.dump(2) << '\n';
  return guard.finish({"ingest_report.json"});
}

StageResult run_homes(const config::PipelineConfig& cfg) {
  StageGuard guard(cfg, "homes",
                   {cfg.events_path, cfg.antennas_path, cfg.comunas_path, cfg.hdi_path,
                    cfg.census_path});
  if (guard.up_to_date()) return guard.skip();

  CityInputs in = load_city_inputs(cfg, !cfg.census_path.empty());
  const Window window = window_of(cfg);
  const int days_in_period = cfg.days_in_period();

  std::map<std::string, residence::EndpointAccumulator> accumulators;
  stream_events(cfg, in.antennas, [&](const ingest::EventRecord& e) {
    const auto lt = timeutil::to_local(e.timestamp, cfg.timezone);
    if (!window.contains(lt.day)) return;
    accumulators[e.device_id].fold(e, in.antennas, cfg.timezone);
  });

  const residence::HomeThresholds thresholds{cfg.day_coverage, cfg.tower_share};
  std::vector<residence::HomeAssignment> retained;
  std::map<std::string, std::size_t> rejection_counts;

  for (const auto& [device, acc] : accumulators) {
    residence::HomeRejection rejection;
    auto home = residence::infer_home(device, acc.finish(), days_in_period, in.antennas,
                                      thresholds, &rejection);
    if (!home) {
      ++rejection_counts[rejection.reason];
      continue;
    }
    const ingest::AntennaSite& site = in.antennas.at(home->home_antenna_id);
    auto comuna = ingest::comuna_of_point({site.lat, site.lon}, in.comunas);
    if (!comuna) {
      ++rejection_counts["no_comuna"];
      continue;
    }
    auto hdi = in.comuna_hdi.find(*comuna);
    if (hdi == in.comuna_hdi.end()) {
      ++rejection_counts["no_hdi"];
      continue;
    }
    home->comuna_id = *comuna;
    home->hdi = hdi->second;
    retained.push_back(std::move(*home));
  }

  {
    auto f = out_file(cfg, "homes.csv");
    csv::Writer w(f);
    w.row({"device_id", "home_antenna_id", "home_cell_lat", "home_cell_lon", "comuna_id",
           "hdi", "days_observed", "top_tower_share"});
    for (const auto& h : retained)
      w.row({h.device_id, h.home_antenna_id, csv::format_double(h.home_cell_id.lat()),
             csv::format_double(h.home_cell_id.lon()), h.comuna_id,
             csv::format_double(h.hdi), std::to_string(h.days_observed),
             csv::format_double(h.top_tower_share)});
  }

  json rep;
  rep["devices_seen"] = accumulators.size();
  rep["retained"] = retained.size();
  rep["rejections"] = rejection_counts;
  rep["days_in_period"] = days_in_period;

  // Census cross-check: per-comuna zone populations vs inferred home counts.
  if (!in.census.empty()) {
    std::unordered_map<std::string, double> census_per_comuna;
    for (const auto& z : in.census) {
      auto comuna = ingest::comuna_of_point(z.centroid, in.comunas);
      if (comuna) census_per_comuna[*comuna] += z.population;
    }
    try {
      rep["census_correlation"] = residence::census_correlation(retained, census_per_comuna);
    } catch (const std::invalid_argument& e) {
      rep["census_correlation"] = nullptr;
      rep["census_correlation_note"] = e.what();
    }
  }

  auto f = out_file(cfg, "homes_report.json");
  f << rep.dump(2) << '\n';
  return guard.finish({"homes.csv", "homes_report.json"});
}

StageResult run_visits(const config::PipelineConfig& cfg) {
  StageGuard guard(cfg, "visits",
                   {cfg.events_path, cfg.antennas_path, cfg.malls_path});
  if (guard.up_to_date()) return guard.skip();

  CityInputs in = load_city_inputs(cfg, false);
  const Window window = window_of(cfg);

  visits::VisitAccumulator acc(in.antennas, cfg.timezone);
  stream_events(cfg, in.antennas, [&](const ingest::EventRecord& e) {
    const auto lt = timeutil::to_local(e.timestamp, cfg.timezone);
    if (!window.contains(lt.day)) return;
    acc.fold(e);
  });
  visits::VisitTable full = acc.finish();
  auto filtered = visits::filter_nonvisitors(full, cfg.visitor_max_presences);

  {
    auto f = out_file(cfg, "visits.csv");
    csv::Writer w(f);
    w.row({"device_id", "mall_id", "day"});
    for (const auto& row : filtered.customers.rows())
      w.row({row.device_id, row.mall_id,
             timeutil::format_date(timeutil::civil_from_days(row.day))});
  }

  {
    auto f = out_file(cfg, "presence_histogram.csv");
    csv::Writer w(f);
    w.row({"total_visits", "distinct_malls", "devices"});
    for (const auto& [key, count] : visits::presence_histogram(full))
      w.row({std::to_string(key.first), std::to_string(key.second), std::to_string(count)});
  }

  json rep;
  rep["devices_total"] = full.by_device().size();
  rep["devices_kept"] = filtered.customers.by_device().size();
  rep["devices_discarded"] = filtered.discarded_devices.size();
  rep["visit_rows"] = filtered.customers.row_count();
  rep["max_day_presences"] = cfg.visitor_max_presences;
  auto f = out_file(cfg, "visits_report.json");
  f << rep.dump(2) << '\n';
  return guard.finish({"visits.csv", "presence_histogram.csv", "visits_report.json"});
}

StageResult run_mixing(const config::PipelineConfig& cfg) {
  const fs::path homes_path = fs::path(cfg.output_dir) / "homes.csv";
  const fs::path visits_path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(homes_path, "urbanflow homes");
  require_artifact(visits_path, "urbanflow visits");
  StageGuard guard(cfg, "mixing",
                   {homes_path.string(), visits_path.string(), cfg.malls_path,
                    cfg.comunas_path, cfg.hdi_path});
  if (guard.up_to_date()) return guard.skip();

  const auto homes = load_homes_csv(cfg);
  const auto table = load_visits_csv(cfg);
  CityInputs in = load_city_inputs(cfg, false);
  const std::uint64_t seed = cfg.require_seed();

  // Quantize over devices present in both homes and visits.
  std::unordered_map<std::string, const residence::HomeAssignment*> home_of;
  for (const auto& h : homes) home_of[h.device_id] = &h;
  std::vector<std::string> devices;
  std::vector<double> hdis;
  for (const auto& [device, malls] : table.by_device()) {
    auto it = home_of.find(device);
    if (it == home_of.end()) continue;
    devices.push_back(device);
    hdis.push_back(it->second->hdi);
  }
  if (hdis.empty())
    throw std::runtime_error("mixing: no devices joinable between homes and visits");
  const auto quantiles = residence::quantize_hdi(hdis, cfg.quantiles);

  std::vector<mixing::DeviceCategory> labels;
  for (std::size_t i = 0; i < devices.size(); ++i)
    labels.push_back({devices[i], quantiles.bin_of(hdis[i])});

  auto built = mixing::build_counts(table, labels, quantiles.labels);
  const auto device_visits = mixing::device_visits_from(table, labels, built.table);
  const auto expo =
      mixing::exposure_significance(built.table, device_visits, cfg.bootstrap_resamples, seed);

  {
    json j;
    j["categories"] = expo.categories;
    j["malls"] = expo.malls;
    j["excluded_malls"] = expo.excluded_malls;
    json E = json::array(), P = json::array(), C = json::array();
    for (Eigen::Index a = 0; a < expo.E.rows(); ++a) {
      json e_row = json::array(), p_row = json::array();
      for (Eigen::Index b = 0; b < expo.E.cols(); ++b) {
        e_row.push_back(expo.E(a, b));
        p_row.push_back(expo.p_values(a, b));
      }
      E.push_back(e_row);
      P.push_back(p_row);
    }
    for (Eigen::Index a = 0; a < expo.counts.rows(); ++a) {
      json c_row = json::array();
      for (Eigen::Index m = 0; m < expo.counts.cols(); ++m) c_row.push_back(expo.counts(a, m));
      C.push_back(c_row);
    }
    j["E"] = E;
    j["p_values"] = P;
    j["counts"] = C;
    json totals = json::array();
    for (Eigen::Index a = 0; a < expo.category_totals.size(); ++a)
      totals.push_back(expo.category_totals[a]);
    j["N_alpha"] = totals;
    j["B"] = expo.bootstrap_resamples;
    j["seed"] = expo.seed;
    json qt;
    qt["boundaries"] = quantiles.boundaries;
    qt["labels"] = quantiles.labels;
    qt["counts"] = quantiles.counts;
    j["hdi_quantiles"] = qt;
    auto f = out_file(cfg, "exposure.json");
    f << j.dump(2) << '\n';
  }

  const auto mall_hdi = mall_location_hdi(in);
  const auto gaps = mixing::hdi_gap_analysis(table, homes, mall_hdi);
  {
    auto f = out_file(cfg, "gaps.csv");
    csv::Writer w(f);
    w.row({"device_id", "comuna_id", "home_hdi", "mean_gap", "visit_rows"});
    for (const auto& g : gaps.device_gaps)
      w.row({g.device_id, g.comuna_id, csv::format_double(g.home_hdi),
             csv::format_double(g.mean_gap), std::to_string(g.visit_rows)});
  }

  {
    const auto matrix = visits::comuna_mall_matrix(table, homes);
    auto f = out_file(cfg, "comuna_mall_matrix.csv");
    csv::Writer w(f);
    std::vector<std::string> header{"comuna_id"};
    header.insert(header.end(), matrix.malls.begin(), matrix.malls.end());
    w.row(header);
    for (std::size_t c = 0; c < matrix.comunas.size(); ++c) {
      std::vector<std::string> row{matrix.comunas[c]};
      for (double v : matrix.shares[c]) row.push_back(csv::format_double(v));
      w.row(row);
    }
  }

  {
    json j;
    auto corr = [](const mixing::Correlation& c) {
      json o;
      o["r"] = c.defined ? json(c.r) : json(nullptr);
      o["n"] = c.n;
      if (!c.note.empty()) o["note"] = c.note;
      return o;
    };
    j["device_level"] = corr(gaps.device_level);
    j["comuna_level"] = corr(gaps.comuna_level);
    j["mall_level"] = corr(gaps.mall_level);
    j["excluded_devices"] = gaps.excluded_devices;
    j["unlabeled_devices"] = built.unlabeled_devices;
    auto f = out_file(cfg, "mixing_report.json");
    f << j.dump(2) << '\n';
  }

  return guard.finish(
      {"exposure.json", "gaps.csv", "comuna_mall_matrix.csv", "mixing_report.json"});
}

namespace {

struct GravityInputs {
  std::vector<residence::HomeAssignment> homes;
  visits::VisitTable table;
  CityInputs city;
  std::unordered_map<geo::CellId, double, geo::CellIdHash> cell_population;
  std::unordered_map<geo::CellId, double, geo::CellIdHash> cell_hdi;
  std::size_t cells_without_comuna = 0;
};

GravityInputs load_gravity_inputs(const config::PipelineConfig& cfg) {
  GravityInputs g;
  g.homes = load_homes_csv(cfg);
  g.table = load_visits_csv(cfg);
  g.city = load_city_inputs(cfg, true);

  // Grid: cells implied by census zones plus home cells.
  std::set<geo::CellId> grid;
  for (const auto& z : g.city.census) grid.insert(geo::snap_to_grid(z.centroid));
  for (const auto& h : g.homes) grid.insert(h.home_cell_id);
  std::vector<geo::CellId> grid_v(grid.begin(), grid.end());
  g.cell_population = ingest::cell_populations(g.city.census, grid_v).population;

  for (const auto& cell : grid_v) {
    auto comuna = ingest::comuna_of_point(cell.center(), g.city.comunas);
    if (!comuna) {
      ++g.cells_without_comuna;
      g.cell_population.erase(cell);  // cells without an HDI leave the table
      continue;
    }
    auto it = g.city.comuna_hdi.find(*comuna);
    if (it == g.city.comuna_hdi.end()) {
      ++g.cells_without_comuna;
      g.cell_population.erase(cell);
      continue;
    }
    g.cell_hdi[cell] = it->second;
  }
  if (g.cells_without_comuna)
    jsonlog::warn("cells without comuna HDI excluded from the flow table")
        .field("cells", g.cells_without_comuna);

  // Homes on excluded cells cannot contribute flows.
  if (g.cells_without_comuna) {
    std::vector<residence::HomeAssignment> kept;
    for (auto& h : g.homes)
      if (g.cell_hdi.count(h.home_cell_id)) kept.push_back(std::move(h));
    g.homes = std::move(kept);
  }
  return g;
}

json gravity_fit_json(const gravity::GravityFit& fit) {
  json j;
  j["fit"] = fit_report_json(fit.report);
  j["pearson_obs_pred"] = fit.pearson_obs_pred;
  j["spearman_obs_pred"] = fit.spearman_obs_pred;
  const auto check = gravity::oreilly_check(fit);
  j["oreilly"] = {{"ratio", check.defined ? json(check.ratio) : json(nullptr)},
                  {"within_range", check.within_range},
                  {"range", {1.5, 2.5}}};
  j["attraction_included"] = fit.attraction_included;
  if (fit.attraction_included)
    j["attraction_transform"] =
        fit.transform == gravity::AttractionTransform::linear ? "linear" : "paper-log";
  return j;
}

}  // namespace

StageResult run_gravity(const config::PipelineConfig& cfg, bool with_attraction) {
  const fs::path homes_path = fs::path(cfg.output_dir) / "homes.csv";
  const fs::path visits_path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(homes_path, "urbanflow homes");
  require_artifact(visits_path, "urbanflow visits");
  StageGuard guard(cfg, with_attraction ? "gravity_attraction" : "gravity",
                   {homes_path.string(), visits_path.string(), cfg.census_path,
                    cfg.malls_path, cfg.comunas_path, cfg.hdi_path});
  if (guard.up_to_date()) return guard.skip();

  GravityInputs in = load_gravity_inputs(cfg);
  gravity::FlowTableOptions opts;
  opts.distance_floor_km = cfg.distance_floor_km;
  const auto table = gravity::build_flow_table(in.table, in.homes, in.cell_population,
                                               in.cell_hdi, in.city.malls, opts);

  const auto fit = gravity::fit_gravity(table);
  throw_if_not_converged(fit.report, "gravity Poisson fit");

  {
    auto f = out_file(cfg, "flows.csv");
    csv::Writer w(f);
    w.row({"cell_lat", "cell_lon", "mall_id", "F", "M_i", "M_j", "D_km", "A"});
    for (const auto& r : table.rows)
      w.row({csv::format_double(r.cell.lat()), csv::format_double(r.cell.lon()), r.mall_id,
             csv::format_double(r.flow), csv::format_double(r.population),
             csv::format_double(r.mall_sqm), csv::format_double(r.distance_km),
             csv::format_double(r.attraction)});
  }

  {
    auto f = out_file(cfg, "predicted_vs_real.csv");
    csv::Writer w(f);
    w.row({"cell_lat", "cell_lon", "mall_id", "observed", "predicted"});
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      w.row({csv::format_double(table.rows[i].cell.lat()),
             csv::format_double(table.rows[i].cell.lon()), table.rows[i].mall_id,
             csv::format_double(table.rows[i].flow), csv::format_double(fit.predicted[i])});
  }

  {
    json j = gravity_fit_json(fit);
    j["rows"] = table.rows.size();
    j["populated_cells"] = table.populated_cells;
    j["malls"] = table.malls;
    j["floored_cells"] = table.floored_cells.size();
    j["cells_without_comuna"] = in.cells_without_comuna;
    auto f = out_file(cfg, "gravity_fit.json");
    f << j.dump(2) << '\n';
  }

  // Observed and predicted per-mall HDI profiles for the KDE overlays.
  {
    const auto profiles = gravity::predicted_profile_distribution(fit, table, in.cell_hdi);
    std::unordered_map<std::string, double> hdi_of;
    for (const auto& h : in.homes) hdi_of[h.device_id] = h.hdi;
    std::map<std::string, std::map<double, double>> observed;
    for (const auto& [device, malls] : in.table.by_device()) {
      auto it = hdi_of.find(device);
      if (it == hdi_of.end()) continue;
      for (const auto& [mall, days] : malls) observed[mall][it->second] += 1.0;
    }
    auto f = out_file(cfg, "mall_profiles.csv");
    csv::Writer w(f);
    w.row({"mall_id", "source", "hdi", "weight"});
    for (const auto& [mall, weights] : observed)
      for (const auto& [hdi, weight] : weights)
        w.row({mall, "observed", csv::format_double(hdi), csv::format_double(weight)});
    for (const auto& p : profiles)
      for (std::size_t i = 0; i < p.hdi.size(); ++i)
        w.row({p.mall_id, "predicted", csv::format_double(p.hdi[i]),
               csv::format_double(p.weight[i])});
  }

  std::vector<std::string> outputs{"flows.csv", "predicted_vs_real.csv", "gravity_fit.json",
                                   "mall_profiles.csv"};

  if (with_attraction) {
    const auto augmented = gravity::fit_gravity_augmented(table, cfg.attraction_transform);
    throw_if_not_converged(augmented.report, "augmented gravity Poisson fit");
    json j = gravity_fit_json(augmented);
    j["rows"] = table.rows.size();
    auto f = out_file(cfg, "gravity_fit_augmented.json");
    f << j.dump(2) << '\n';
    outputs.push_back("gravity_fit_augmented.json");
  }
  return guard.finish(outputs);
}

StageResult run_covisit_fit(const config::PipelineConfig& cfg) {
  const fs::path homes_path = fs::path(cfg.output_dir) / "homes.csv";
  const fs::path visits_path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(homes_path, "urbanflow homes");
  require_artifact(visits_path, "urbanflow visits");
  StageGuard guard(cfg, "covisit_fit",
                   {homes_path.string(), visits_path.string(), cfg.malls_path});
  if (guard.up_to_date()) return guard.skip();

  const auto homes = load_homes_csv(cfg);
  const auto table = load_visits_csv(cfg);
  CityInputs in = load_city_inputs(cfg, false);

  const auto P = covisit::covisit_matrix(table);
  const auto S = covisit::similarity_matrix(table, homes, cfg.similarity_mode);

  auto write_matrix = [&](const std::string& name, const std::vector<std::string>& malls,
                          const Eigen::MatrixXd& M) {
    auto f = out_file(cfg, name);
    csv::Writer w(f);
    std::vector<std::string> header{"mall_id"};
    header.insert(header.end(), malls.begin(), malls.end());
    w.row(header);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      std::vector<std::string> row{malls[static_cast<std::size_t>(i)]};
      for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(csv::format_double(M(i, j)));
      w.row(row);
    }
  };
  write_matrix("covisit.csv", P.malls, P.P);
  write_matrix("similarity.csv", S.malls, S.S);

  covisit::CovisitFitOptions opts;
  opts.pairs = cfg.covisit_pairs;
  opts.covisit_threshold = cfg.covisit_threshold;
  opts.distance_floor_km = cfg.distance_floor_km;
  const auto fit = covisit::fit_covisit_logit(P, S, in.malls, opts);
  throw_if_not_converged(fit.full, "co-visitation logit fit");

  {
    json j;
    j["full"] = fit_report_json(fit.full);
    j["reduced"] = fit_report_json(fit.reduced);
    j["r2_full"] = fit.r2_full;
    j["r2_reduced"] = fit.r2_reduced;
    j["spearman_obs_pred"] = fit.spearman_obs_pred;
    j["pairs_used"] = fit.pairs_used;
    j["pairs_excluded"] = fit.pairs_excluded;
    j["similarity_mode"] =
        cfg.similarity_mode == covisit::SimilarityMode::similarity ? "similarity" : "distance";
    j["pair_selection"] =
        cfg.covisit_pairs == covisit::PairSelection::all ? "all" : "thresholded";
    auto f = out_file(cfg, "covisit_fit.json");
    f << j.dump(2) << '\n';
  }

  {
    const auto mall_hdi = gravity::mall_mean_visitor_hdi(table, homes);
    const auto pairs = covisit::customer_mall_hdi_density(table, homes, mall_hdi);
    auto f = out_file(cfg, "hdi_pairs.csv");
    csv::Writer w(f);
    w.row({"customer_hdi", "mall_mean_hdi"});
    for (std::size_t i = 0; i < pairs.customer_hdi.size(); ++i)
      w.row({csv::format_double(pairs.customer_hdi[i]),
             csv::format_double(pairs.mall_hdi[i])});
  }

  return guard.finish({"covisit.csv", "similarity.csv", "covisit_fit.json", "hdi_pairs.csv"});
}

StageResult run_covisit_cluster(const config::PipelineConfig& cfg) {
  const fs::path homes_path = fs::path(cfg.output_dir) / "homes.csv";
  const fs::path visits_path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(homes_path, "urbanflow homes");
  require_artifact(visits_path, "urbanflow visits");
  StageGuard guard(cfg, "covisit_cluster", {homes_path.string(), visits_path.string()});
  if (guard.up_to_date()) return guard.skip();

  const auto homes = load_homes_csv(cfg);
  const auto table = load_visits_csv(cfg);
  const std::uint64_t seed = cfg.require_seed();

  const auto S = covisit::similarity_matrix(table, homes, covisit::SimilarityMode::similarity);
  const auto mall_hdi = gravity::mall_mean_visitor_hdi(table, homes);
  const auto clusters = covisit::cluster_malls(S, mall_hdi, cfg.cluster_count, seed);

  json j;
  j["k"] = cfg.cluster_count;
  j["seed"] = seed;
  json labels = json::object();
  for (std::size_t i = 0; i < S.malls.size(); ++i) labels[S.malls[i]] = clusters.labels[i];
  j["labels"] = labels;
  json arr = json::array();
  for (const auto& c : clusters.clusters)
    arr.push_back({{"label", c.label},
                   {"malls", c.malls},
                   {"mean_visitor_hdi", c.mean_visitor_hdi}});
  j["clusters"] = arr;
  auto f = out_file(cfg, "clusters.json");
  f << j.dump(2) << '\n';
  return guard.finish({"clusters.json"});
}

StageResult run_covisit_network(const config::PipelineConfig& cfg) {
  const fs::path visits_path = fs::path(cfg.output_dir) / "visits.csv";
  require_artifact(visits_path, "urbanflow visits");
  StageGuard guard(cfg, "covisit_network", {visits_path.string()});
  if (guard.up_to_date()) return guard.skip();

  const auto table = load_visits_csv(cfg);
  const auto P = covisit::covisit_matrix(table);
  const auto edges = covisit::export_network(P, cfg.covisit_threshold);

  {
    auto f = out_file(cfg, "network.dot");
    f << covisit::network_to_dot(edges);
  }
  {
    auto f = out_file(cfg, "network.json");
    f << covisit::network_to_json(edges) << '\n';
  }
  return guard.finish({"network.dot", "network.json"});
}

namespace {

synth::Scenario scenario_for(const config::PipelineConfig& cfg) {
  synth::Scenario sc;
  if (!cfg.scenario_path.empty()) {
    require_input(cfg.scenario_path, "scenario", "set inputs.scenario in the config");
    sc = synth::Scenario::from_file(cfg.scenario_path);
  }
  if (cfg.seed) sc.seed = *cfg.seed;  // --seed overrides the scenario seed
  return sc;
}

}  // namespace

StageResult run_synth_city(const config::PipelineConfig& cfg) {
  std::vector<std::string> inputs;
  if (!cfg.scenario_path.empty()) inputs.push_back(cfg.scenario_path);
  StageGuard guard(cfg, "synth_city", inputs);
  if (guard.up_to_date()) return guard.skip();

  const synth::Scenario sc = scenario_for(cfg);
  const synth::City city = synth::generate_city(sc);
  synth::write_city_files(sc, city, cfg.output_dir);
  jsonlog::info("synthetic city written")
      .field("cells", city.cells.size())
      .field("malls", city.malls.size())
      .field("antennas", city.antennas.size());
  return guard.finish({"antennas.csv", "malls.geojson", "comunas.geojson", "hdi.csv",
                       "census.csv", "pipeline.toml"});
}

StageResult run_synth_traces(const config::PipelineConfig& cfg) {
  std::vector<std::string> inputs;
  if (!cfg.scenario_path.empty()) inputs.push_back(cfg.scenario_path);
  StageGuard guard(cfg, "synth_traces", inputs);
  if (guard.up_to_date()) return guard.skip();

  const synth::Scenario sc = scenario_for(cfg);
  const synth::City city = synth::generate_city(sc);
  const auto manifest = synth::generate_traces(sc, city, cfg.output_dir);
  jsonlog::info("synthetic traces written")
      .field("devices", manifest.device_count)
      .field("events", manifest.event_count)
      .field("gravity_g", manifest.gravity_g);
  return guard.finish({"events.csv", "manifest.json"});
}

StageResult run_report(const config::PipelineConfig& cfg) {
  const fs::path out(cfg.output_dir);
  require_artifact(out / "predicted_vs_real.csv", "urbanflow gravity fit");
  require_artifact(out / "exposure.json", "urbanflow mixing");
  require_artifact(out / "mall_profiles.csv", "urbanflow gravity fit");
  StageGuard guard(cfg, "report",
                   {(out / "predicted_vs_real.csv").string(), (out / "exposure.json").string(),
                    (out / "mall_profiles.csv").string()});
  if (guard.up_to_date()) return guard.skip();

  fs::create_directories(out / "report");
  std::vector<std::string> outputs;

  {  // Predicted vs real scatter, log-log.
    auto f = csv::open_input((out / "predicted_vs_real.csv").string());
    csv::Reader reader(f, "predicted_vs_real.csv");
    const auto c_obs = reader.column("observed");
    const auto c_pred = reader.column("predicted");
    report::Series s;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
      s.x.push_back(parse_double_or_throw(fields.at(c_obs), "predicted_vs_real.csv"));
      s.y.push_back(parse_double_or_throw(fields.at(c_pred), "predicted_vs_real.csv"));
    }
    report::PlotOptions opts;
    opts.title = "Predicted vs observed flows";
    opts.x_label = "observed flow";
    opts.y_label = "predicted flow";
    opts.log_x = true;
    opts.log_y = true;
    auto svg = out_file(cfg, "report/predicted_vs_real.svg");
    svg << report::scatter_svg({s}, opts, true);
    outputs.push_back("report/predicted_vs_real.svg");
  }

  {  // Exposure bar chart with the E = 1 null guide.
    std::ifstream f(out / "exposure.json");
    json j;
    f >> j;
    const auto categories = j.at("categories").get<std::vector<std::string>>();
    std::vector<std::vector<double>> values;
    for (const auto& row : j.at("E")) values.push_back(row.get<std::vector<double>>());
    report::PlotOptions opts;
    opts.title = "Exposure E per category pair";
    opts.y_label = "E";
    auto svg = out_file(cfg, "report/exposure.svg");
    svg << report::grouped_bars_svg(categories, categories, values, opts, 1.0);
    outputs.push_back("report/exposure.svg");
  }

  {  // Per-mall KDE overlays: observed vs predicted visitor-HDI profiles.
    auto f = csv::open_input((out / "mall_profiles.csv").string());
    csv::Reader reader(f, "mall_profiles.csv");
    const auto c_mall = reader.column("mall_id");
    const auto c_src = reader.column("source");
    const auto c_hdi = reader.column("hdi");
    const auto c_w = reader.column("weight");
    struct Profile {
      std::vector<double> hdi, weight;
    };
    std::map<std::string, std::map<std::string, Profile>> profiles;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
      auto& p = profiles[fields.at(c_mall)][fields.at(c_src)];
      p.hdi.push_back(parse_double_or_throw(fields.at(c_hdi), "mall_profiles.csv"));
      p.weight.push_back(parse_double_or_throw(fields.at(c_w), "mall_profiles.csv"));
    }
    fs::create_directories(out / "report" / "mall_profiles");
    for (const auto& [mall, sources] : profiles) {
      std::vector<report::Series> series;
      for (const auto& [source, p] : sources) {
        if (p.hdi.size() < 2) continue;
        // Common support across the HDI range with a rule-of-thumb width.
        double lo = *std::min_element(p.hdi.begin(), p.hdi.end());
        double hi = *std::max_element(p.hdi.begin(), p.hdi.end());
        if (!(hi > lo)) {
          lo -= 0.05;
          hi += 0.05;
        }
        const double h = std::max(0.01, (hi - lo) / 10.0);
        std::vector<double> grid;
        for (int i = 0; i <= 120; ++i)
          grid.push_back(lo - 3 * h + (hi - lo + 6 * h) * i / 120.0);
        report::Series s;
        s.label = source;
        s.x = grid;
        s.y = numerics::kde_weighted(p.hdi, p.weight, grid, h);
        series.push_back(std::move(s));
      }
      if (series.empty()) continue;
      report::PlotOptions opts;
      opts.title = "Visitor HDI profile: " + mall;
      opts.x_label = "HDI";
      opts.y_label = "density";
      auto svg = out_file(cfg, "report/mall_profiles/" + mall + ".svg");
      svg << report::lines_svg(series, opts);
      outputs.push_back("report/mall_profiles/" + mall + ".svg");
    }
  }

  if (fs::exists(out / "similarity.csv")) {  // optional heatmap
    auto f = csv::open_input((out / "similarity.csv").string());
    csv::Reader reader(f, "similarity.csv");
    std::vector<std::string> malls(reader.header().begin() + 1, reader.header().end());
    std::vector<std::vector<double>> values;
    std::vector<std::string> rows;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
      rows.push_back(fields.at(0));
      std::vector<double> row;
      for (std::size_t i = 1; i < fields.size(); ++i)
        row.push_back(parse_double_or_throw(fields[i], "similarity.csv"));
      values.push_back(std::move(row));
    }
    report::PlotOptions opts;
    opts.title = "Mall similarity (1 - KS distance)";
    auto svg = out_file(cfg, "report/similarity.svg");
    svg << report::heatmap_svg(rows, malls, values, opts);
    outputs.push_back("report/similarity.svg");
  }

  return guard.finish(outputs);
}

}  // namespace urbanflow::pipeline
