#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "urbanflow/numerics/stats.hpp"

using namespace urbanflow::numerics;

TEST_CASE("ks two-sample hand values") {
  const std::vector<double> a{1, 2}, b{1.5, 2.5};
  CHECK(ks_two_sample(a, b) == doctest::Approx(0.5));
  CHECK(ks_two_sample(a, a) == doctest::Approx(0.0));
  const std::vector<double> zeros{0, 0}, ones{1, 1};
  CHECK(ks_two_sample(zeros, ones) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ks_two_sample({}, ones), std::invalid_argument);
}

TEST_CASE("ks matches the all-breakpoints oracle on random pairs") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> n1(0, 1), n2(0.4, 1.3);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(len(rng)));
    std::vector<double> b(static_cast<std::size_t>(len(rng)));
    // quantize some trials so ties appear
    const bool tie_trial = trial % 3 == 0;
    for (auto& v : a) v = tie_trial ? coarse(rng) : n1(rng);
    for (auto& v : b) v = tie_trial ? coarse(rng) : n2(rng);
    CHECK(ks_two_sample(a, b) == doctest::Approx(oracles::ks_naive(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("ks symmetry and monotone-transform invariance") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> a(40), b(25);
  for (auto& v : a) v = nd(rng);
  for (auto& v : b) v = nd(rng) + 0.3;
  CHECK(ks_two_sample(a, b) == doctest::Approx(ks_two_sample(b, a)));

  auto transform = [](std::vector<double> v) {
    for (auto& x : v) x = std::exp(2.0 * x) + 5.0;  // strictly increasing
    return v;
  };
  CHECK(ks_two_sample(a, b) == doctest::Approx(ks_two_sample(transform(a), transform(b))));
}

TEST_CASE("pearson hand values and errors") {
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) ==
        doctest::Approx(1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) ==
        doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                  std::invalid_argument);
}

TEST_CASE("spearman rank invariance under monotone transforms") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = nd(rng);
    b[i] = std::exp(a[i]) + 0.01 * nd(rng);
  }
  std::vector<double> cubed = a;
  for (auto& v : cubed) v = v * v * v + 10.0;
  CHECK(spearman(a, cubed) == doctest::Approx(1.0));
  CHECK(spearman(a, b) == doctest::Approx(spearman(cubed, b)));
}

TEST_CASE("spearman matches the quadratic rank oracle, ties included") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> small(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(100), b(100);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = small(rng);  // heavy ties
      b[i] = small(rng) + 0.3 * small(rng);
    }
    CHECK(spearman(a, b) ==
          doctest::Approx(oracles::spearman_quadratic(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("kde peak, symmetry and normalization") {
  // single point at 0, h = 1: peak is the Gaussian kernel maximum
  const std::vector<double> point{0.0};
  const std::vector<double> at_zero{0.0};
  CHECK(kde(point, at_zero, 1.0)[0] == doctest::Approx(0.3989422804).epsilon(1e-6));

  std::mt19937_64 rng(43);
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> sample(300);
  for (auto& v : sample) v = nd(rng);
  // symmetrize the sample so the estimate must be exactly symmetric
  std::vector<double> sym = sample;
  for (double v : sample) sym.push_back(-v);

  const double h = bandwidth_1d(sym, BandwidthRule::scott);
  const auto grid = kde_grid(sym, h, 801, 8.0);
  const auto density = kde(sym, grid, h);
  for (std::size_t i = 0; i < grid.size() / 2; ++i) {
    const std::size_t mirror = grid.size() - 1 - i;
    CHECK(density[i] == doctest::Approx(density[mirror]).epsilon(1e-6));
  }

  // trapezoid integral over the padded grid
  double integral = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    integral += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("kde bandwidth rules and failure modes") {
  std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK_THROWS_AS(bandwidth_1d(flat, BandwidthRule::scott), std::invalid_argument);
  CHECK_THROWS_AS(kde(flat, std::vector<double>{2.0}, 0.0), std::invalid_argument);
  // explicit bandwidth still works on a degenerate sample
  CHECK(kde(flat, std::vector<double>{2.0}, 0.5)[0] > 0.0);

  std::vector<double> spread{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(bandwidth_1d(spread, BandwidthRule::scott) > 0.0);
  CHECK(bandwidth_1d(spread, BandwidthRule::silverman) > 0.0);
}

TEST_CASE("kde2d normalizes and needs matched samples") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> xs(200), ys(200);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = nd(rng);
    ys[i] = 0.5 * xs[i] + nd(rng);
  }
  std::vector<double> gx, gy;
  for (int i = -40; i <= 40; ++i) {
    gx.push_back(i * 0.25);
    gy.push_back(i * 0.25);
  }
  const auto density = kde2d(xs, ys, gx, gy);
  double integral = 0;
  for (std::size_t a = 1; a < gx.size(); ++a)
    for (std::size_t b = 1; b < gy.size(); ++b) {
      const double avg = (density[a * gy.size() + b] + density[(a - 1) * gy.size() + b] +
                          density[a * gy.size() + b - 1] + density[(a - 1) * gy.size() + b - 1]) /
                         4.0;
      integral += avg * (gx[a] - gx[a - 1]) * (gy[b] - gy[b - 1]);
    }
  CHECK(std::abs(integral - 1.0) < 5e-3);
  CHECK_THROWS_AS(kde2d(xs, std::vector<double>{1.0}, gx, gy), std::invalid_argument);
}

TEST_CASE("weighted kde reduces to replication") {
  const std::vector<double> sample{0.0, 1.0};
  const std::vector<double> weights{2.0, 1.0};
  const std::vector<double> replicated{0.0, 0.0, 1.0};
  const std::vector<double> grid{-0.5, 0.0, 0.5, 1.0, 1.5};
  const auto a = kde_weighted(sample, weights, grid, 0.4);
  const auto b = kde(replicated, grid, 0.4);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
}
