#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "urbanflow/geo.hpp"
#include "urbanflow/numerics/glm.hpp"
#include "urbanflow/numerics/spectral.hpp"
#include "urbanflow/numerics/stats.hpp"

namespace {

using namespace urbanflow;

void BM_Haversine(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-34.0, -33.0), lon(-71.0, -70.0);
  std::vector<geo::LatLon> pts(1024);
  for (auto& p : pts) p = {lat(rng), lon(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geo::haversine_km(pts[i % 1024], pts[(i + 7) % 1024]));
    ++i;
  }
}
BENCHMARK(BM_Haversine);

void BM_KsTwoSample(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> na(0, 1), nb(0.3, 1.2);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = na(rng);
  for (auto& v : b) v = nb(rng);
  for (auto _ : state) benchmark::DoNotOptimize(numerics::ks_two_sample(a, b));
}
BENCHMARK(BM_KsTwoSample)->Arg(100)->Arg(1000)->Arg(10000);

numerics::DesignMatrix gravity_sized_problem(std::size_t n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0, 1);
  numerics::DesignMatrix d;
  d.X.resize(static_cast<Eigen::Index>(n), 4);
  d.y.resize(static_cast<Eigen::Index>(n));
  d.names = {"logG", "alpha", "beta", "gamma"};
  Eigen::VectorXd beta(4);
  beta << -3.5, 0.5, 0.5, 1.2;
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = 7.0 + nd(rng);
    d.X(i, 2) = 11.0 + nd(rng);
    d.X(i, 3) = -(1.0 + std::abs(nd(rng)));
    const double mu = std::exp(std::min(12.0, d.X.row(i).dot(beta)));
    std::poisson_distribution<long> pois(mu);
    d.y[i] = double(pois(rng));
  }
  return d;
}

void BM_PoissonIrls(benchmark::State& state) {
  const auto d = gravity_sized_problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(numerics::poisson_irls(d));
}
BENCHMARK(BM_PoissonIrls)->Arg(1000)->Arg(6400);

void BM_SpectralCluster(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  Eigen::MatrixXd S = Eigen::MatrixXd::Constant(m, m, 0.1);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i / (m / 3 + 1) == j / (m / 3 + 1)) S(i, j) = 0.9;
  for (int i = 0; i < m; ++i) S(i, i) = 1.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(numerics::spectral_cluster(S, 3, 17));
}
BENCHMARK(BM_SpectralCluster)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
