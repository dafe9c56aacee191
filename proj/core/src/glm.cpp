#include "urbanflow/numerics/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace urbanflow::numerics {

namespace {

constexpr double kCi95 = 1.959964;

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string("DesignMatrix: non-finite entries in ") + what);
}

/// Columns that a column-pivoted QR places beyond the numerical rank.
std::vector<std::string> collinear_columns(const Eigen::MatrixXd& X,
                                           const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  std::vector<std::string> dependent;
  if (rank >= X.cols()) return dependent;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = rank; i < X.cols(); ++i)
    dependent.push_back(names[static_cast<std::size_t>(perm[i])]);
  std::sort(dependent.begin(), dependent.end());
  return dependent;
}

void require_full_rank(const DesignMatrix& d) {
  auto dep = collinear_columns(d.X, d.names);
  if (!dep.empty()) {
    std::string msg = "design matrix is rank deficient; collinear columns:";
    for (const auto& c : dep) msg += " " + c;
    throw std::invalid_argument(msg);
  }
}

struct WaldSummary {
  Eigen::VectorXd se, z, p, lo, hi;
};

WaldSummary wald(const Eigen::VectorXd& coef, const Eigen::MatrixXd& fisher) {
  // Inverse Fisher information; fisher is SPD for a full-rank converged fit.
  Eigen::MatrixXd cov = fisher.ldlt().solve(
      Eigen::MatrixXd::Identity(fisher.rows(), fisher.cols()));
  WaldSummary w;
  const Eigen::Index p = coef.size();
  w.se.resize(p);
  w.z.resize(p);
  w.p.resize(p);
  w.lo.resize(p);
  w.hi.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double v = cov(j, j);
    w.se[j] = v > 0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    w.z[j] = coef[j] / w.se[j];
    w.p[j] = z_two_sided_p(w.z[j]);
    w.lo[j] = coef[j] - kCi95 * w.se[j];
    w.hi[j] = coef[j] + kCi95 * w.se[j];
  }
  return w;
}

double lgamma1p(double y) { return std::lgamma(y + 1.0); }

}  // namespace

void DesignMatrix::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("DesignMatrix: empty design");
  if (X.rows() < X.cols())
    throw std::invalid_argument("DesignMatrix: fewer rows than columns (n < p)");
  if (static_cast<Eigen::Index>(names.size()) != X.cols())
    throw std::invalid_argument("DesignMatrix: column name count does not match columns");
  if (y.size() != X.rows())
    throw std::invalid_argument("DesignMatrix: response length does not match rows");
  if (weights.size() != 0 && weights.size() != X.rows())
    throw std::invalid_argument("DesignMatrix: weight length does not match rows");
  check_finite(X, "X");
  check_finite(y, "y");
  if (weights.size()) check_finite(weights, "weights");
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j])
        throw std::invalid_argument("DesignMatrix: duplicate column name '" + names[i] + "'");
}

double poisson_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += y[i] * eta[i] - std::exp(eta[i]) - lgamma1p(y[i]);
  return ll;
}

Eigen::VectorXd poisson_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta) {
  const Eigen::VectorXd mu = (X * beta).array().exp();
  return X.transpose() * (y - mu);
}

double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double wi = w.size() ? w[i] : 1.0;
    // y*eta - log(1+exp(eta)), computed stably for large |eta|
    const double log1pexp =
        eta[i] > 30 ? eta[i] : std::log1p(std::exp(std::min(eta[i], 30.0)));
    ll += wi * (y[i] * eta[i] - log1pexp);
  }
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  Eigen::VectorXd mu = (1.0 + (-(X * beta).array()).exp()).inverse();
  Eigen::VectorXd r = y - mu;
  if (w.size()) r = r.cwiseProduct(w);
  return X.transpose() * r;
}

FitReport poisson_irls(const DesignMatrix& d, const GlmOptions& opts) {
  d.validate();
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    if (d.y[i] < 0 || std::floor(d.y[i]) != d.y[i])
      throw std::invalid_argument("poisson_irls: response must be non-negative integers");
  }
  if (d.y.sum() <= 0)
    throw std::invalid_argument("poisson_irls: response is identically zero");
  require_full_rank(d);

  const Eigen::Index n = d.n(), p = d.p();
  const double ybar = d.y.mean();

  // Standard GLM start: mu halfway between the data and its mean.
  Eigen::VectorXd mu = (d.y.array() + ybar) / 2.0;
  Eigen::VectorXd eta = mu.array().log();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  FitReport rep;
  rep.family = "poisson";
  rep.method = "IRLS";
  rep.names = d.names;
  rep.n_obs = n;
  rep.df_model = static_cast<int>(p) - 1;
  rep.df_residual = static_cast<int>(n - p);

  Eigen::MatrixXd fisher(p, p);
  bool have_beta = false;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    rep.iterations = iter;
    const Eigen::VectorXd w = mu;  // Var(Y) = mu, d(eta)/d(mu) = 1/mu
    const Eigen::VectorXd z = eta + (d.y - mu).cwiseQuotient(mu);
    const Eigen::MatrixXd Xw = d.X.array().colwise() * w.array();
    fisher = d.X.transpose() * Xw;
    const Eigen::VectorXd rhs = Xw.transpose() * z;
    const Eigen::VectorXd beta_new = fisher.ldlt().solve(rhs);

    if (!beta_new.allFinite()) break;  // divergence; report non-converged
    const double delta =
        have_beta ? (beta_new - beta).cwiseAbs().maxCoeff() : std::numeric_limits<double>::max();
    beta = beta_new;
    have_beta = true;
    eta = d.X * beta;
    if (eta.maxCoeff() > 700) break;  // exp overflow; divergence
    mu = eta.array().exp();
    if (delta <= opts.tol) {
      rep.converged = true;
      break;
    }
  }

  rep.coef = beta;
  const WaldSummary w = wald(beta, fisher);
  rep.std_err = w.se;
  rep.z = w.z;
  rep.p_value = w.p;
  rep.ci_low = w.lo;
  rep.ci_high = w.hi;

  rep.loglik = poisson_loglik(d.X, d.y, beta);
  double ll0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    ll0 += d.y[i] * std::log(ybar) - ybar - lgamma1p(d.y[i]);
  rep.loglik_null = ll0;
  rep.mcfadden_r2 = ll0 != 0.0 ? 1.0 - rep.loglik / ll0 : 0.0;
  rep.llr_pvalue = rep.df_model > 0
                       ? chi2_sf(2.0 * (rep.loglik - rep.loglik_null), rep.df_model)
                       : 1.0;

  double dev = 0.0, chi2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = d.y[i], mi = mu[i];
    dev += yi > 0 ? yi * std::log(yi / mi) - (yi - mi) : mi;
    chi2 += (yi - mi) * (yi - mi) / mi;
  }
  rep.deviance = 2.0 * dev;
  rep.pearson_chi2 = chi2;
  return rep;
}

FitReport logistic_newton(const DesignMatrix& d, const GlmOptions& opts) {
  d.validate();
  for (Eigen::Index i = 0; i < d.y.size(); ++i)
    if (d.y[i] < 0.0 || d.y[i] > 1.0)
      throw std::invalid_argument("logistic_newton: responses must lie in [0,1]");
  require_full_rank(d);

  const Eigen::Index n = d.n(), p = d.p();
  const Eigen::VectorXd w =
      d.weights.size() ? d.weights : Eigen::VectorXd::Ones(n);
  if ((w.array() < 0).any())
    throw std::invalid_argument("logistic_newton: negative row weight");

  FitReport rep;
  rep.family = "logit";
  rep.method = "Newton-Raphson";
  rep.names = d.names;
  rep.n_obs = n;
  rep.df_model = static_cast<int>(p) - 1;
  rep.df_residual = static_cast<int>(n - p);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd fisher = Eigen::MatrixXd::Identity(p, p);
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    rep.iterations = iter;
    const Eigen::VectorXd eta = d.X * beta;
    const Eigen::VectorXd mu = (1.0 + (-eta.array()).exp()).inverse();
    Eigen::VectorXd wk = mu.array() * (1.0 - mu.array());
    wk = wk.cwiseProduct(w).cwiseMax(1e-12);
    const Eigen::MatrixXd Xw = d.X.array().colwise() * wk.array();
    fisher = d.X.transpose() * Xw;
    const Eigen::VectorXd score = d.X.transpose() * ((d.y - mu).cwiseProduct(w));
    const Eigen::VectorXd step = fisher.ldlt().solve(score);
    if (!step.allFinite()) break;
    beta += step;
    if (step.cwiseAbs().maxCoeff() <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (beta.cwiseAbs().maxCoeff() > 1e3) break;  // runaway estimates
  }

  // Diverging coefficients on a non-converged fit indicate separation.
  if (!rep.converged && beta.cwiseAbs().maxCoeff() > 15.0) rep.separation = true;

  rep.coef = beta;
  const WaldSummary ws = wald(beta, fisher);
  rep.std_err = ws.se;
  rep.z = ws.z;
  rep.p_value = ws.p;
  rep.ci_low = ws.lo;
  rep.ci_high = ws.hi;

  rep.loglik = logistic_loglik(d.X, d.y, d.weights, beta);
  const double wsum = w.sum();
  const double pbar = w.dot(d.y) / wsum;
  double ll0 = 0.0;
  if (pbar > 0.0 && pbar < 1.0) {
    const double lp = std::log(pbar), lq = std::log1p(-pbar);
    for (Eigen::Index i = 0; i < n; ++i) ll0 += w[i] * (d.y[i] * lp + (1.0 - d.y[i]) * lq);
  }
  rep.loglik_null = ll0;
  rep.mcfadden_r2 = ll0 != 0.0 ? 1.0 - rep.loglik / ll0 : 0.0;
  rep.llr_pvalue = rep.df_model > 0
                       ? chi2_sf(2.0 * (rep.loglik - rep.loglik_null), rep.df_model)
                       : 1.0;
  return rep;
}

double FitReport::coefficient(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coef[static_cast<Eigen::Index>(i)];
  throw std::out_of_range("FitReport: no coefficient named '" + name + "'");
}

std::string FitReport::to_json() const {
  nlohmann::json j;
  j["Model"] = family == "poisson" ? "GLM" : "Logit";
  j["Model Family"] = family == "poisson" ? "Poisson" : "Binomial";
  j["Link Function"] = family == "poisson" ? "log" : "logit";
  j["Method"] = method;
  j["No. Observations"] = n_obs;
  j["Df Residuals"] = df_residual;
  j["Df Model"] = df_model;
  j["Scale"] = 1.0;
  j["Log-Likelihood"] = loglik;
  j["LL-Null"] = loglik_null;
  j["LLR p-value"] = llr_pvalue;
  j["Pseudo R-squ."] = mcfadden_r2;
  if (family == "poisson") {
    j["Deviance"] = deviance;
    j["Pearson chi2"] = pearson_chi2;
  }
  j["converged"] = converged;
  j["iterations"] = iterations;
  if (separation) j["separation"] = true;

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back({{"name", names[i]},
                    {"coef", coef[k]},
                    {"std err", std_err[k]},
                    {"z", z[k]},
                    {"P>|z|", p_value[k]},
                    {"[0.025", ci_low[k]},
                    {"0.975]", ci_high[k]}});
  }
  j["coefficients"] = rows;
  return j.dump(2);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double z_two_sided_p(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

namespace {

// Regularized incomplete gamma, series and continued-fraction forms.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double eps = 1e-15, fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double dd = 1.0 / b;
  double h = dd;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < fpmin) dd = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    dd = 1.0 / dd;
    const double del = dd * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  if (k <= 0.0) throw std::invalid_argument("chi2_sf: degrees of freedom must be positive");
  const double a = k / 2.0, hx = x / 2.0;
  if (hx < a + 1.0) return 1.0 - gamma_p_series(a, hx);
  return gamma_q_cf(a, hx);
}

}  // namespace urbanflow::numerics
