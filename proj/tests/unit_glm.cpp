#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "urbanflow/numerics/glm.hpp"

using namespace urbanflow::numerics;

namespace {

DesignMatrix intercept_only(std::initializer_list<double> ys) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(ys.size()), 1);
  d.names = {"intercept"};
  d.y.resize(static_cast<Eigen::Index>(ys.size()));
  Eigen::Index i = 0;
  for (double y : ys) d.y[i++] = y;
  return d;
}

DesignMatrix poisson_problem(std::uint64_t seed, Eigen::Index n, const Eigen::VectorXd& beta) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  DesignMatrix d;
  d.X.resize(n, beta.size());
  d.names.resize(static_cast<std::size_t>(beta.size()));
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    d.names[static_cast<std::size_t>(j)] = "x" + std::to_string(j);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < beta.size(); ++j) d.X(i, j) = nd(rng);
    const double mu = std::exp(d.X.row(i).dot(beta));
    std::poisson_distribution<long> pois(mu);
    d.y[i] = double(pois(rng));
  }
  return d;
}

}  // namespace

TEST_CASE("poisson intercept-only equals log of the sample mean") {
  const auto rep = poisson_irls(intercept_only({2, 4, 6}));
  CHECK(rep.converged);
  CHECK(std::abs(rep.coef[0] - std::log(4.0)) < 1e-6);
  CHECK(rep.mcfadden_r2 == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("poisson recovers planted coefficients") {
  Eigen::VectorXd beta(2);
  beta << 1.0, 0.5;
  const auto d = poisson_problem(42, 10000, beta);
  const auto rep = poisson_irls(d);
  CHECK(rep.converged);
  CHECK(std::abs(rep.coef[0] - 1.0) < 0.05);
  CHECK(std::abs(rep.coef[1] - 0.5) < 0.05);
  // score equation at the optimum: residuals orthogonal to the intercept
  const Eigen::VectorXd mu = (d.X * rep.coef).array().exp();
  CHECK(std::abs((d.y - mu).sum()) < 1e-4);
}

TEST_CASE("poisson IRLS agrees with the gradient-descent reference") {
  std::mt19937_64 seeds(7);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd beta(3);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    beta << u(seeds) + 0.5, u(seeds), u(seeds);
    const auto d = poisson_problem(seeds(), 300, beta);
    const auto rep = poisson_irls(d);
    REQUIRE(rep.converged);
    const Eigen::VectorXd ref = oracles::poisson_gradient_descent(d.X, d.y);
    CHECK((rep.coef - ref).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("analytic scores match central finite differences") {
  Eigen::VectorXd beta(3);
  beta << 0.4, -0.3, 0.2;
  const auto d = poisson_problem(11, 500, beta);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd at(3);
    at << nd(rng), nd(rng), nd(rng);
    const Eigen::VectorXd grad = poisson_score(d.X, d.y, at);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double h = 1e-6;
      Eigen::VectorXd hi = at, lo = at;
      hi[j] += h;
      lo[j] -= h;
      const double fd = (poisson_loglik(d.X, d.y, hi) - poisson_loglik(d.X, d.y, lo)) / (2 * h);
      CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
    }
  }

  // logistic scores as well
  DesignMatrix l;
  l.X = d.X;
  l.names = d.names;
  l.y.resize(d.y.size());
  std::mt19937_64 rng2(17);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Eigen::Index i = 0; i < l.y.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-l.X.row(i).dot(beta)));
    l.y[i] = u01(rng2) < p ? 1.0 : 0.0;
  }
  const Eigen::VectorXd w;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd at(3);
    at << nd(rng), nd(rng), nd(rng);
    const Eigen::VectorXd grad = logistic_score(l.X, l.y, w, at);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double h = 1e-6;
      Eigen::VectorXd hi = at, lo = at;
      hi[j] += h;
      lo[j] -= h;
      const double fd =
          (logistic_loglik(l.X, l.y, w, hi) - logistic_loglik(l.X, l.y, w, lo)) / (2 * h);
      CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
    }
  }
}

TEST_CASE("rank-deficient designs fail loudly, naming the columns") {
  DesignMatrix d;
  d.X.resize(6, 3);
  d.names = {"intercept", "x", "x_copy"};
  d.y.resize(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = double(i);
    d.X(i, 2) = 2.0 * double(i);  // collinear with x
    d.y[i] = double(i + 1);
  }
  CHECK_THROWS_WITH_AS(poisson_irls(d), doctest::Contains("x_copy"), std::invalid_argument);
}

TEST_CASE("poisson rejects invalid responses") {
  auto d = intercept_only({1, 2, 3});
  d.y[0] = -1;
  CHECK_THROWS_AS(poisson_irls(d), std::invalid_argument);
  d.y[0] = 1.5;
  CHECK_THROWS_AS(poisson_irls(d), std::invalid_argument);
  CHECK_THROWS_AS(poisson_irls(intercept_only({0, 0, 0})), std::invalid_argument);
}

TEST_CASE("logistic intercept-only gives logit of the mean") {
  const auto rep = logistic_newton(intercept_only({0, 1, 0, 1}));
  CHECK(rep.converged);
  CHECK(std::abs(rep.coef[0]) < 1e-8);
  CHECK(rep.mcfadden_r2 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.llr_pvalue == doctest::Approx(1.0));
}

TEST_CASE("logistic recovers planted coefficients") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DesignMatrix d;
  const Eigen::Index n = 20000;
  d.X.resize(n, 2);
  d.names = {"intercept", "x"};
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = nd(rng);
    const double p = 1.0 / (1.0 + std::exp(-(-1.0 + 2.0 * d.X(i, 1))));
    d.y[i] = u01(rng) < p ? 1.0 : 0.0;
  }
  const auto rep = logistic_newton(d);
  CHECK(rep.converged);
  CHECK(std::abs(rep.coef[0] - (-1.0)) < 0.05);
  CHECK(std::abs(rep.coef[1] - 2.0) < 0.05);
  CHECK(rep.mcfadden_r2 > 0.0);
  CHECK(rep.llr_pvalue < 1e-10);
}

TEST_CASE("logistic accepts fractional responses and weights") {
  DesignMatrix d;
  d.X.resize(4, 2);
  d.names = {"intercept", "x"};
  d.y.resize(4);
  d.weights.resize(4);
  d.X << 1, 0, 1, 1, 1, 2, 1, 3;
  d.y << 0.1, 0.3, 0.6, 0.9;
  d.weights << 10, 10, 10, 10;
  const auto rep = logistic_newton(d);
  CHECK(rep.converged);
  CHECK(rep.coef[1] > 0.0);  // monotone increase
}

TEST_CASE("perfect separation is reported, not crashed") {
  DesignMatrix d;
  const Eigen::Index n = 40;
  d.X.resize(n, 2);
  d.names = {"intercept", "x"};
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = double(i) - double(n) / 2.0;
    d.y[i] = d.X(i, 1) > 0 ? 1.0 : 0.0;
  }
  const auto rep = logistic_newton(d);
  CHECK_FALSE(rep.converged);
  CHECK(rep.separation);
}

TEST_CASE("fit report json carries the table fields") {
  const auto rep = logistic_newton(intercept_only({0, 1, 1, 0}));
  const std::string j = rep.to_json();
  for (const char* key : {"Pseudo R-squ.", "Log-Likelihood", "LL-Null", "LLR p-value",
                          "No. Observations", "Df Residuals", "Df Model", "coef", "std err",
                          "P>|z|", "[0.025", "0.975]"})
    CHECK_MESSAGE(j.find(key) != std::string::npos, "missing field: " << key);

  const auto prep = poisson_irls(intercept_only({2, 4, 6}));
  const std::string pj = prep.to_json();
  for (const char* key : {"Deviance", "Pearson chi2", "IRLS", "log"})
    CHECK_MESSAGE(pj.find(key) != std::string::npos, "missing field: " << key);
}

TEST_CASE("wald intervals use the documented multiplier") {
  const auto rep = poisson_irls(intercept_only({2, 4, 6}));
  CHECK(rep.ci_low[0] == doctest::Approx(rep.coef[0] - 1.959964 * rep.std_err[0]));
  CHECK(rep.ci_high[0] == doctest::Approx(rep.coef[0] + 1.959964 * rep.std_err[0]));
}

TEST_CASE("chi-squared tail and normal cdf sanity") {
  CHECK(chi2_sf(0.0, 3) == doctest::Approx(1.0));
  CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(chi2_sf(7.814727903251179, 3) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
  CHECK(z_two_sided_p(1.959964) == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("design matrix validation") {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(2, 3);
  d.names = {"a", "b", "c"};
  d.y = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // n < p

  d.X = Eigen::MatrixXd::Ones(5, 2);
  d.names = {"a", "a"};
  d.y = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // duplicate names

  d.names = {"a", "b"};
  d.X(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // non-finite
}
