#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "urbanflow/covisit.hpp"
#include "urbanflow/gravity.hpp"
#include "urbanflow/timeutil.hpp"

namespace urbanflow::config {

/// Raised on malformed config input; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal TOML reader covering the subset these config files use:
/// [section] / [a.b] headers, scalar values (string, integer, float,
/// boolean) and flat arrays of scalars. Keys are exposed dotted
/// ("section.key").
class Toml {
 public:
  struct Value {
    enum class Kind { string, integer, floating, boolean, array } kind;
    std::string s;
    std::int64_t i = 0;
    double d = 0.0;
    bool b = false;
    std::vector<Value> items;
  };

  static Toml parse(std::istream& in, const std::string& source = "<toml>");
  static Toml parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::vector<std::string> keys() const;

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;  // accepts integers
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

 private:
  const Value& at(const std::string& key) const;
  std::map<std::string, Value> values_;
  std::string source_;
};

/// Thresholds, paths, and knobs shared across pipeline stages. Defaults
/// carry the analysis constants the stages document.
struct PipelineConfig {
  // Inputs (resolved relative to the config file location).
  std::string events_path;
  std::string antennas_path;
  std::string malls_path;
  std::string comunas_path;
  std::string hdi_path;
  std::string census_path;
  std::string scenario_path;  // synth subcommands

  timeutil::UtcOffset timezone{-4 * 3600};
  timeutil::CivilDate window_start{2016, 8, 1};
  timeutil::CivilDate window_end{2016, 8, 28};

  std::size_t visitor_max_presences = 10;
  double day_coverage = 0.8;
  double tower_share = 0.6;
  double covisit_threshold = 0.10;
  double distance_floor_km = 0.5;
  int quantiles = 5;

  int bootstrap_resamples = 1000;
  std::optional<std::uint64_t> seed;  // must be explicit for randomized stages

  gravity::AttractionTransform attraction_transform = gravity::AttractionTransform::linear;
  covisit::SimilarityMode similarity_mode = covisit::SimilarityMode::similarity;
  covisit::PairSelection covisit_pairs = covisit::PairSelection::all;
  int cluster_count = 3;

  std::vector<std::string> mall_keywords{"mall"};
  std::string output_dir = "out";

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig from_toml(const Toml& toml, const std::string& base_dir);

  /// Throws ConfigError when a threshold leaves its documented range or
  /// the window is empty.
  void validate() const;

  int days_in_period() const;
  std::uint64_t require_seed() const;
};

}  // namespace urbanflow::config
