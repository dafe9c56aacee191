#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "urbanflow/numerics/spectral.hpp"

using namespace urbanflow::numerics;

namespace {

/// Planted block-similarity matrix with uniform noise of the given radius.
Eigen::MatrixXd block_matrix(const std::vector<int>& sizes, double within, double across,
                             double noise, std::uint64_t seed) {
  int n = 0;
  for (int s : sizes) n += s;
  std::vector<int> block;
  for (std::size_t b = 0; b < sizes.size(); ++b)
    for (int i = 0; i < sizes[b]; ++i) block.push_back(static_cast<int>(b));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-noise, noise);
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i) {
    S(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double v = (block[static_cast<std::size_t>(i)] == block[static_cast<std::size_t>(j)]
                      ? within
                      : across) +
                 jitter(rng);
      v = std::min(1.0, std::max(0.0, v));
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

std::vector<int> planted_labels(const std::vector<int>& sizes) {
  std::vector<int> out;
  for (std::size_t b = 0; b < sizes.size(); ++b)
    for (int i = 0; i < sizes[b]; ++i) out.push_back(static_cast<int>(b));
  return out;
}

}  // namespace

TEST_CASE("two-block similarity recovers the planted split") {
  const auto S = block_matrix({5, 5}, 0.9, 0.1, 0.0, 1);
  const auto labels = spectral_cluster(S, 2, 99);
  const auto expected = oracles::best_partition_exhaustive(S, 2);
  CHECK(oracles::canonical_partition(labels) == expected);
  CHECK(oracles::canonical_partition(labels) ==
        oracles::canonical_partition(planted_labels({5, 5})));
}

TEST_CASE("three blocks at m=9 match the exhaustive partition oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto S = block_matrix({3, 3, 3}, 0.9, 0.1, 0.05, 100 + seed);
    const auto labels = spectral_cluster(S, 3, seed);
    const auto oracle = oracles::best_partition_exhaustive(S, 3);
    CHECK(oracles::canonical_partition(labels) == oracle);
  }
}

TEST_CASE("permuting the input permutes the labels consistently") {
  const auto S = block_matrix({4, 3, 3}, 0.85, 0.15, 0.03, 7);
  const int n = static_cast<int>(S.rows());
  const auto labels = spectral_cluster(S, 3, 11);

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(13);
  std::shuffle(perm.begin(), perm.end(), rng);

  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      P(i, j) = S(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  const auto permuted = spectral_cluster(P, 3, 11);

  // same partition structure: pairs agree on same/different cluster
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool orig_same = labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] ==
                             labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
      const bool perm_same = permuted[static_cast<std::size_t>(i)] ==
                             permuted[static_cast<std::size_t>(j)];
      CHECK(orig_same == perm_same);
    }
}

TEST_CASE("degenerate cluster counts") {
  const auto S = block_matrix({3, 3}, 0.9, 0.1, 0.0, 3);
  CHECK_THROWS_AS(spectral_cluster(S, 7, 1), std::invalid_argument);
  CHECK_THROWS_AS(spectral_cluster(S, 0, 1), std::invalid_argument);

  // k = n: singletons
  const auto labels = spectral_cluster(S, 6, 1);
  std::set<int> distinct(labels.begin(), labels.end());
  CHECK(distinct.size() == 6);

  // k = 1: one cluster
  const auto one = spectral_cluster(S, 1, 1);
  for (int l : one) CHECK(l == 0);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(3, 3, 0.5);
  bad(0, 1) = 0.9;  // asymmetric
  CHECK_THROWS_AS(spectral_cluster(bad, 2, 1), std::invalid_argument);

  Eigen::MatrixXd off = Eigen::MatrixXd::Identity(3, 3);
  off(1, 1) = 0.4;  // diagonal not 1
  CHECK_THROWS_AS(spectral_cluster(off, 2, 1), std::invalid_argument);

  Eigen::MatrixXd range = Eigen::MatrixXd::Identity(3, 3);
  range(0, 1) = range(1, 0) = 1.5;  // out of [0,1]
  CHECK_THROWS_AS(spectral_cluster(range, 2, 1), std::invalid_argument);
}

TEST_CASE("deterministic for a fixed seed") {
  const auto S = block_matrix({6, 5, 5}, 0.9, 0.1, 0.05, 21);
  const auto a = spectral_cluster(S, 3, 1234);
  const auto b = spectral_cluster(S, 3, 1234);
  CHECK(a == b);
}

TEST_CASE("disconnected affinity splits into components") {
  // two exact components: zero across-similarity
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) S(i, i) = 1.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        S(i, j) = 0.8;
        S(i + 3, j + 3) = 0.8;
      }
  const auto labels = spectral_cluster(S, 2, 5);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[1] == labels[2]);
  CHECK(labels[3] == labels[4]);
  CHECK(labels[4] == labels[5]);
  CHECK(labels[0] != labels[3]);
}

TEST_CASE("kmeans sanity: obvious clusters and seeded determinism") {
  Eigen::MatrixXd pts(6, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1;
  const auto result = kmeans(pts, 2, 42);
  CHECK(result.labels[0] == result.labels[1]);
  CHECK(result.labels[1] == result.labels[2]);
  CHECK(result.labels[3] == result.labels[4]);
  CHECK(result.labels[0] != result.labels[3]);
  CHECK(result.inertia == doctest::Approx(kmeans(pts, 2, 42).inertia));
  CHECK_THROWS_AS(kmeans(pts, 7, 1), std::invalid_argument);
}
