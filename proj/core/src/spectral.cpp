#include "urbanflow/numerics/spectral.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "urbanflow/numerics/random.hpp"

namespace urbanflow::numerics {

namespace {

double sq_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& pts, int k, std::mt19937_64& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd centers(k, pts.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = pts.row(first(rng));

  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(pts.row(i), centers.row(0));

  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen;
    if (total <= 0.0) {
      // All points coincide with an existing center; any choice is fine.
      chosen = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = pts.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(pts.row(i), centers.row(c)));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                    int max_iter) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > n) throw std::invalid_argument("kmeans: k exceeds number of points");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(r));
    Eigen::MatrixXd centers = kmeanspp_init(points, k, rng);
    std::vector<int> labels(n, 0);

    double inertia = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double bd = std::numeric_limits<double>::infinity();
        int bl = 0;
        for (int c = 0; c < k; ++c) {
          const double d = sq_dist(points.row(i), centers.row(c));
          if (d < bd) {
            bd = d;
            bl = c;
          }
        }
        labels[i] = bl;
        inertia += bd;
      }

      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[i]) += points.row(i);
        counts[labels[i]] += 1.0;
      }
      // An emptied cluster is reseeded on the point farthest from its center.
      for (int c = 0; c < k; ++c) {
        if (counts[c] == 0.0) {
          Eigen::Index far = 0;
          double fd = -1.0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double d = sq_dist(points.row(i), centers.row(labels[i]));
            if (d > fd) {
              fd = d;
              far = i;
            }
          }
          sums.row(c) = points.row(far);
          counts[c] = 1.0;
        }
      }

      Eigen::MatrixXd next(k, points.cols());
      for (int c = 0; c < k; ++c) next.row(c) = sums.row(c) / counts[c];
      const double moved = (next - centers).rowwise().norm().maxCoeff();
      centers = next;
      if (moved <= 1e-12) break;
    }

    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centers = centers;
    }
  }
  return best;
}

std::vector<int> canonicalize_labels(const std::vector<int>& labels) {
  std::vector<int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int found = -1;
    for (std::size_t r = 0; r < remap.size(); ++r)
      if (remap[r] == labels[i]) {
        found = static_cast<int>(r);
        break;
      }
    if (found < 0) {
      found = static_cast<int>(remap.size());
      remap.push_back(labels[i]);
    }
    out[i] = found;
  }
  return out;
}

std::vector<int> spectral_cluster(const Eigen::MatrixXd& S, int k, std::uint64_t seed,
                                  const SpectralOptions& opts) {
  const Eigen::Index n = S.rows();
  if (S.cols() != n) throw std::invalid_argument("spectral_cluster: S must be square");
  if (k < 1) throw std::invalid_argument("spectral_cluster: k must be >= 1");
  if (k > n) throw std::invalid_argument("spectral_cluster: k exceeds matrix size");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > opts.symmetry_tol)
    throw std::invalid_argument("spectral_cluster: S is not symmetric");
  if (S.minCoeff() < -opts.symmetry_tol || S.maxCoeff() > 1.0 + opts.symmetry_tol)
    throw std::invalid_argument("spectral_cluster: entries must lie in [0,1]");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(S(i, i) - 1.0) > opts.symmetry_tol)
      throw std::invalid_argument("spectral_cluster: diagonal must be 1 in similarity mode");

  // L_sym = I - D^(-1/2) S D^(-1/2); unit diagonal keeps every degree > 0.
  Eigen::VectorXd dinv_sqrt = S.rowwise().sum().array().rsqrt();
  Eigen::MatrixXd lsym =
      Eigen::MatrixXd::Identity(n, n) -
      (dinv_sqrt.asDiagonal() * S * dinv_sqrt.asDiagonal());
  lsym = 0.5 * (lsym + lsym.transpose());  // enforce exact symmetry

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lsym);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("spectral_cluster: eigendecomposition failed");
  Eigen::MatrixXd embed = eig.eigenvectors().leftCols(k);

  // Fix each eigenvector's sign so the embedding does not depend on solver
  // internals: largest-magnitude entry is made positive.
  for (Eigen::Index c = 0; c < embed.cols(); ++c) {
    Eigen::Index arg;
    embed.col(c).cwiseAbs().maxCoeff(&arg);
    if (embed(arg, c) < 0) embed.col(c) = -embed.col(c);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = embed.row(i).norm();
    if (norm > 0) embed.row(i) /= norm;
  }

  const KMeansResult km = kmeans(embed, k, seed, opts.kmeans_restarts);
  return canonicalize_labels(km.labels);
}

}  // namespace urbanflow::numerics
