#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urbanflow/residence.hpp"
#include "urbanflow/visits.hpp"

namespace urbanflow::mixing {

/// Unique-visitor counts n_alpha(m): one row per category, one column per
/// mall. Totals are derived from the matrix itself, so the identity
/// sum_m n_alpha(m) = N_alpha holds by construction (a device visiting two
/// malls contributes to both columns).
struct CountTable {
  std::vector<std::string> categories;
  std::vector<std::string> malls;
  Eigen::MatrixXd counts;  // k x M

  Eigen::VectorXd category_totals() const { return counts.rowwise().sum(); }
  Eigen::VectorXd mall_totals() const { return counts.colwise().sum(); }
  double total() const { return counts.sum(); }
};

/// Build the count table from visits joined to per-device category labels.
/// Devices missing a label are skipped and counted.
struct DeviceCategory {
  std::string device_id;
  std::size_t category = 0;
};
struct CountBuildResult {
  CountTable table;
  std::size_t unlabeled_devices = 0;
};
CountBuildResult build_counts(const visits::VisitTable& visits,
                              const std::vector<DeviceCategory>& labels,
                              const std::vector<std::string>& category_names);

/// Representation r_alpha(m) of each category in each mall. Malls with
/// n(m) = 0 are excluded (columns dropped) and listed in the result.
struct RepresentationResult {
  std::vector<std::string> malls;  // surviving malls
  Eigen::MatrixXd r;               // k x M'
  std::vector<std::string> excluded_malls;
};
RepresentationResult representation(const CountTable& counts);

struct ExposureMatrix {
  std::vector<std::string> categories;
  Eigen::MatrixXd E;            // k x k; diagonal is the isolation I_alpha
  Eigen::MatrixXd p_values;     // filled by exposure_significance, else empty
  Eigen::VectorXd category_totals;
  Eigen::MatrixXd counts;       // n_alpha(m) actually used (excluded malls dropped)
  std::vector<std::string> malls;
  std::vector<std::string> excluded_malls;
  int bootstrap_resamples = 0;
  std::uint64_t seed = 0;
};

/// E_alpha_beta = (1/N_alpha) sum_m n_alpha(m) r_beta(m). Throws on an
/// empty category.
ExposureMatrix exposure(const CountTable& counts);

/// Device-level structure the bootstrap reshuffles: each device carries its
/// category and the set of malls it visited.
struct DeviceVisits {
  std::size_t category = 0;
  std::vector<std::size_t> malls;  // mall indices into the count table
};

/// Null distribution by reassigning each device's category independently
/// with probabilities N_alpha/N, recomputing E per resample. Two-sided
/// percentile p-values with the standard +1 correction; deterministic for
/// a fixed seed (per-resample substreams).
ExposureMatrix exposure_significance(const CountTable& counts,
                                     const std::vector<DeviceVisits>& devices, int resamples,
                                     std::uint64_t seed);

/// Attach observed-data categories/malls to devices for the bootstrap.
std::vector<DeviceVisits> device_visits_from(const visits::VisitTable& visits,
                                             const std::vector<DeviceCategory>& labels,
                                             const CountTable& table);

struct Correlation {
  double r = 0.0;
  bool defined = false;
  std::string note;  // e.g. "zero variance"
  std::size_t n = 0;
};

struct HdiGapResult {
  /// Per-device mean gap (mall-location HDI minus residence HDI), averaged
  /// over the device's visit rows.
  struct DeviceGap {
    std::string device_id;
    std::string comuna_id;
    double home_hdi = 0.0;
    double mean_gap = 0.0;
    std::size_t visit_rows = 0;
  };
  std::vector<DeviceGap> device_gaps;
  Correlation device_level;   // home HDI vs mean gap
  Correlation comuna_level;   // comuna HDI vs mean device gap
  Correlation mall_level;     // mall HDI vs mean (mall HDI - visitor HDI)
  std::size_t excluded_devices = 0;  // visits without HDI joins
};

/// The three Fig.-5-style correlations. `mall_hdi` maps mall_id to the HDI
/// of the comuna containing the mall.
HdiGapResult hdi_gap_analysis(const visits::VisitTable& visits,
                              const std::vector<residence::HomeAssignment>& homes,
                              const std::unordered_map<std::string, double>& mall_hdi);

}  // namespace urbanflow::mixing
