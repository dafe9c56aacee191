#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written the slow, obvious way and shares
// no code with the implementation paths under test.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Gradient descent with Armijo backtracking on the Poisson log-likelihood.
/// Columns are assumed reasonably scaled; run until the score is tiny.
inline Eigen::VectorXd poisson_gradient_descent(const Eigen::MatrixXd& X,
                                                const Eigen::VectorXd& y,
                                                int max_iter = 200000, double tol = 1e-10) {
  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = X * b;
    double ll = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ll += y[i] * eta[i] - std::exp(eta[i]);
    return ll;
  };
  double ll = loglik(beta);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd mu = (X * beta).array().exp();
    const Eigen::VectorXd grad = X.transpose() * (y - mu);
    if (grad.cwiseAbs().maxCoeff() < tol) break;
    double step = 1.0 / std::max(1.0, mu.maxCoeff() * X.rows());
    // Armijo backtracking on the ascent direction.
    for (int back = 0; back < 60; ++back) {
      const Eigen::VectorXd cand = beta + step * grad;
      const double cand_ll = loglik(cand);
      if (cand_ll >= ll + 1e-4 * step * grad.squaredNorm()) {
        beta = cand;
        ll = cand_ll;
        break;
      }
      step *= 0.5;
    }
  }
  return beta;
}

/// KS statistic by evaluating both ECDFs at every breakpoint of either
/// sample.
inline double ks_naive(std::vector<double> a, std::vector<double> b) {
  std::vector<double> points = a;
  points.insert(points.end(), b.begin(), b.end());
  std::sort(points.begin(), points.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto ecdf = [](const std::vector<double>& s, double x) {
    std::size_t c = 0;
    for (double v : s)
      if (v <= x) ++c;
    return double(c) / double(s.size());
  };
  double d = 0;
  for (double x : points) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

/// Mid-ranks by pairwise counting, then the plain Pearson formula.
inline double spearman_quadratic(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++less;
        if (v[j] == v[i] && j != i) ++equal;
      }
      r[i] = less + 1.0 + equal / 2.0;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Direct double-loop evaluation of the exposure definition.
inline Eigen::MatrixXd exposure_bruteforce(const Eigen::MatrixXd& counts) {
  const Eigen::Index k = counts.rows(), M = counts.cols();
  Eigen::VectorXd N_alpha = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd n_m = Eigen::VectorXd::Zero(M);
  double N = 0;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index m = 0; m < M; ++m) {
      N_alpha[a] += counts(a, m);
      n_m[m] += counts(a, m);
      N += counts(a, m);
    }
  Eigen::MatrixXd E(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      double acc = 0;
      for (Eigen::Index m = 0; m < M; ++m) {
        const double r_b = (counts(b, m) / N_alpha[b]) / (n_m[m] / N);
        acc += counts(a, m) * r_b;
      }
      E(a, b) = acc / N_alpha[a];
    }
  return E;
}

/// Convex-polygon containment via half-plane tests (vertices in order).
inline bool convex_contains(const std::vector<std::pair<double, double>>& poly, double px,
                            double py) {
  const std::size_t n = poly.size();
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x1, y1] = poly[i];
    const auto [x2, y2] = poly[(i + 1) % n];
    const double cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
    if (cross == 0) continue;  // on the edge counts as inside
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

/// Canonical form of a label vector: relabel by first occurrence.
inline std::vector<int> canonical_partition(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.emplace(l, int(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

/// Exhaustive best-k-partition by total within-cluster similarity, over all
/// assignments with exactly k non-empty clusters. Feasible for n <= 10.
inline std::vector<int> best_partition_exhaustive(const Eigen::MatrixXd& S, int k) {
  const int n = static_cast<int>(S.rows());
  std::vector<int> current(static_cast<std::size_t>(n), 0);
  std::vector<int> best;
  double best_score = -1;
  const long total = static_cast<long>(std::pow(double(k), double(n)));
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::set<int> used;
    for (int i = 0; i < n; ++i) {
      current[static_cast<std::size_t>(i)] = static_cast<int>(c % k);
      used.insert(current[static_cast<std::size_t>(i)]);
      c /= k;
    }
    if (static_cast<int>(used.size()) != k) continue;
    double score = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (current[static_cast<std::size_t>(i)] == current[static_cast<std::size_t>(j)])
          score += S(i, j);
    if (score > best_score) {
      best_score = score;
      best = current;
    }
  }
  return canonical_partition(best);
}

}  // namespace oracles
