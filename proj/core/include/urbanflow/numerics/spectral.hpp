#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace urbanflow::numerics {

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding. `restarts` independent seeded
/// runs; the lowest-inertia run wins (ties broken by restart order).
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int restarts = 20, int max_iter = 300);

struct SpectralOptions {
  int kmeans_restarts = 20;
  double symmetry_tol = 1e-9;
};

/// Spectral clustering on a similarity matrix: normalized-Laplacian
/// embedding on the k smallest eigenvectors, rows normalized to unit
/// length, then seeded k-means. Labels are canonicalized so the first row
/// gets cluster 0, the next unseen cluster 1, and so on.
///
/// Requires S symmetric with entries in [0,1] and unit diagonal; k in
/// [1, n]. Deterministic for a fixed seed.
std::vector<int> spectral_cluster(const Eigen::MatrixXd& S, int k, std::uint64_t seed,
                                  const SpectralOptions& opts = {});

/// Relabel so that cluster ids appear in first-occurrence order.
std::vector<int> canonicalize_labels(const std::vector<int>& labels);

}  // namespace urbanflow::numerics
