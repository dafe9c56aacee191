#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "urbanflow/ingest.hpp"
#include "urbanflow/numerics/glm.hpp"
#include "urbanflow/residence.hpp"
#include "urbanflow/visits.hpp"

namespace urbanflow::covisit {

/// Conditional co-visitation probabilities p(j|i) = |V_i ∩ V_j| / |V_i|.
struct CovisitMatrix {
  std::vector<std::string> malls;
  Eigen::MatrixXd P;                    // row i: p(j|i); diagonal 1
  std::vector<std::size_t> visitor_counts;
  std::vector<std::string> undefined_malls;  // zero visitors
};

CovisitMatrix covisit_matrix(const visits::VisitTable& visits);

enum class SimilarityMode { similarity, distance };

/// Pairwise customer-profile comparison: KS distance between per-mall
/// visitor-HDI samples; similarity mode stores 1 - D (unit diagonal).
struct SimilarityMatrix {
  std::vector<std::string> malls;
  Eigen::MatrixXd S;
  SimilarityMode mode = SimilarityMode::similarity;
};

SimilarityMatrix similarity_matrix(const visits::VisitTable& visits,
                                   const std::vector<residence::HomeAssignment>& homes,
                                   SimilarityMode mode = SimilarityMode::similarity);

enum class PairSelection { all, thresholded };

struct CovisitFitOptions {
  PairSelection pairs = PairSelection::all;
  double covisit_threshold = 0.10;  // used by PairSelection::thresholded
  double distance_floor_km = 0.5;
  numerics::GlmOptions glm;
};

struct CovisitFit {
  numerics::FitReport full;     // logK, beta (log M_j), lambda (log S), gamma (-log D)
  numerics::FitReport reduced;  // without the similarity term
  double spearman_obs_pred = 0.0;
  double r2_full = 0.0;     // determination coefficient of predictions
  double r2_reduced = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_excluded = 0;  // S_ij = 0 or filtered out
};

/// Logistic fit of p(j|i) over ordered mall pairs i != j on
/// [1, log M_j, log S_ij, -log D_ij]; also fits the reduced model without
/// the similarity regressor. Pairs with S_ij <= 0 are excluded and counted.
CovisitFit fit_covisit_logit(const CovisitMatrix& P, const SimilarityMatrix& S,
                             const std::vector<ingest::MallSite>& malls,
                             const CovisitFitOptions& opts = {});

struct ClusterSummary {
  int label = 0;
  std::vector<std::string> malls;
  double mean_visitor_hdi = 0.0;
};

struct ClusterResult {
  std::vector<int> labels;  // aligned with S.malls
  std::vector<ClusterSummary> clusters;
};

/// Spectral clustering of the similarity matrix (requires similarity mode).
ClusterResult cluster_malls(const SimilarityMatrix& S,
                            const std::unordered_map<std::string, double>& mall_mean_hdi,
                            int k, std::uint64_t seed);

struct NetworkEdge {
  std::string from;
  std::string to;
  double weight = 0.0;
};

/// Directed edges with p(j|i) >= threshold, self-loops excluded.
std::vector<NetworkEdge> export_network(const CovisitMatrix& P, double threshold = 0.10);

std::string network_to_dot(const std::vector<NetworkEdge>& edges);
std::string network_to_json(const std::vector<NetworkEdge>& edges);

/// One (customer HDI, mall mean-visitor HDI) pair per visit row, the 2-D
/// KDE sample of the customer/mall profile joint distribution.
struct HdiPairSample {
  std::vector<double> customer_hdi;
  std::vector<double> mall_hdi;
};
HdiPairSample customer_mall_hdi_density(const visits::VisitTable& visits,
                                        const std::vector<residence::HomeAssignment>& homes,
                                        const std::unordered_map<std::string, double>& mall_mean_hdi);

}  // namespace urbanflow::covisit
