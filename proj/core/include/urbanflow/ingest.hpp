#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "urbanflow/geo.hpp"

namespace urbanflow::ingest {

/// One anonymized device <-> antenna interaction.
struct EventRecord {
  std::string device_id;
  std::int64_t timestamp = 0;  // epoch seconds UTC
  std::string antenna_id;
  std::int64_t bytes_down = 0;
  std::int64_t bytes_up = 0;
};

struct AntennaSite {
  std::string antenna_id;
  std::string tower_id;
  double lat = 0.0;
  double lon = 0.0;
  bool indoor = false;
  std::string description;
  std::optional<std::string> mall_id;  // set by map_antennas_to_malls
};

struct MallSite {
  std::string mall_id;
  std::string name;
  geo::Ring polygon;  // closed ring, first vertex repeated at the end
  double rental_sqm = 0.0;
  geo::LatLon centroid;
};

struct GridCell {
  geo::CellId cell_id;
  geo::LatLon center;
  double population = 0.0;
  double hdi = 0.0;
  std::string comuna_id;
};

struct ComunaShape {
  std::string comuna_id;
  std::string name;
  geo::Ring polygon;
};

struct CensusZone {
  std::string zone_id;
  geo::LatLon centroid;
  double population = 0.0;
};

class AntennaRegistry {
 public:
  void add(AntennaSite site);
  const AntennaSite* find(const std::string& antenna_id) const;
  const AntennaSite& at(const std::string& antenna_id) const;
  std::size_t size() const { return sites_.size(); }
  const std::vector<AntennaSite>& sites() const { return sites_; }
  std::vector<AntennaSite>& sites() { return sites_; }

  /// Smallest antenna_id registered on a tower; throws for unknown towers.
  const std::string& tower_representative(const std::string& tower_id) const;

 private:
  std::vector<AntennaSite> sites_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::string> tower_rep_;
};

/// Per-file parse outcome: emitted record count plus a bounded rejection log.
struct ParseStats {
  std::size_t emitted = 0;
  std::size_t rejected = 0;
  struct Rejection {
    std::size_t line;
    std::string reason;  // e.g. "unknown_antenna", "bad_timestamp"
  };
  std::vector<Rejection> rejections;          // first `max_logged` only
  std::unordered_map<std::string, std::size_t> reason_counts;
  std::size_t max_logged = 1000;

  void reject(std::size_t line, std::string reason);
};

/// Streaming parse of events CSV (header `device_id,timestamp,antenna_id,
/// bytes_down,bytes_up`). Timestamps are ISO-8601 with offset or integer
/// epoch seconds, detected on the first data row. Every well-formed record
/// whose antenna resolves in the registry is passed to `sink`; malformed
/// rows are counted with reasons, never silently dropped. Throws only on an
/// unreadable stream or missing header columns.
ParseStats parse_events(std::istream& in, const AntennaRegistry& registry,
                        const std::function<void(const EventRecord&)>& sink,
                        const std::string& source_name = "events");

/// Convenience wrapper collecting records into memory.
std::pair<std::vector<EventRecord>, ParseStats> read_events(std::istream& in,
                                                            const AntennaRegistry& registry);

AntennaRegistry load_antennas(const std::string& path);
std::vector<MallSite> load_malls_geojson(const std::string& path);
std::vector<ComunaShape> load_comunas_geojson(const std::string& path);
/// hdi.csv: either `comuna_id,hdi` or `comuna_id,i_health,i_education,i_income`
/// (components combined by geometric mean).
std::unordered_map<std::string, double> load_hdi(const std::string& path);
std::vector<CensusZone> load_census(const std::string& path);

/// Antenna -> mall assignment with the two-method consistency report.
struct MallMappingReport {
  std::size_t mapped = 0;
  struct Disagreement {
    std::string antenna_id;
    bool matched_by_geometry;
    bool matched_by_keyword;
    std::string geometry_mall;  // empty when not matched
    std::string keyword_mall;
  };
  std::vector<Disagreement> disagreements;
};

/// Maps an antenna to a mall when its coordinates fall inside the mall
/// polygon or its description contains a mall keyword (case-insensitive).
/// Antennas where the two methods disagree are still mapped (geometry
/// wins) but flagged in the report. Mall polygons must be pairwise
/// disjoint; an antenna inside two polygons throws. A keyword-only match
/// resolves its mall by the mall name appearing in the description; if no
/// name resolves, the antenna stays unmapped and is flagged.
MallMappingReport map_antennas_to_malls(AntennaRegistry& registry,
                                        const std::vector<MallSite>& malls,
                                        const std::vector<std::string>& keywords = {"mall"});

/// Apportion census-zone populations to grid cells by zone centroid. Total
/// population is conserved exactly; a centroid outside every requested cell
/// goes to the nearest cell center (counted in `relocated`).
struct CellPopulationResult {
  std::unordered_map<geo::CellId, double, geo::CellIdHash> population;
  std::size_t relocated = 0;
};
CellPopulationResult cell_populations(const std::vector<CensusZone>& zones,
                                      const std::vector<geo::CellId>& grid);

/// Comuna containing the point (first match in file order), if any.
std::optional<std::string> comuna_of_point(const geo::LatLon& pt,
                                           const std::vector<ComunaShape>& comunas);

}  // namespace urbanflow::ingest
