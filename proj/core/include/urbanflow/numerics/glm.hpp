#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace urbanflow::numerics {

/// Regression design: n x p regressors with named columns, a response, and
/// optional row weights (empty means unit weights).
struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  Eigen::VectorXd y;
  Eigen::VectorXd weights;

  /// Throws std::invalid_argument on non-finite entries, n < p, duplicate
  /// column names, or mismatched dimensions.
  void validate() const;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Fit diagnostics in the shape GLM packages print: per-coefficient Wald
/// inference plus likelihood/deviance summaries.
struct FitReport {
  std::string family;  // "poisson" or "logit"
  std::string method;  // "IRLS" or "Newton-Raphson"
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd std_err;
  Eigen::VectorXd z;
  Eigen::VectorXd p_value;
  Eigen::VectorXd ci_low;   // coef - 1.959964 * se
  Eigen::VectorXd ci_high;  // coef + 1.959964 * se

  double loglik = 0.0;
  double loglik_null = 0.0;
  double deviance = 0.0;      // Poisson only
  double pearson_chi2 = 0.0;  // Poisson only
  double mcfadden_r2 = 0.0;
  double llr_pvalue = 1.0;  // chi^2 test of model vs intercept-only

  long n_obs = 0;
  int df_model = 0;
  int df_residual = 0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;  // logit: divergence consistent with perfect separation

  double coefficient(const std::string& name) const;
  std::string to_json() const;
};

struct GlmOptions {
  double tol = 1e-8;   // convergence on max |delta coef|
  int max_iter = 100;
};

/// Poisson GLM with log link, fitted by iteratively reweighted least
/// squares. Requires integer-valued y >= 0 and full-column-rank X; a
/// rank-deficient design raises with the offending column names.
FitReport poisson_irls(const DesignMatrix& d, const GlmOptions& opts = {});

/// Bernoulli log-likelihood maximized by Newton-Raphson. Accepts binary
/// responses or proportions in [0,1], optionally weighted. Divergence is
/// reported as a non-converged fit with the separation flag set.
FitReport logistic_newton(const DesignMatrix& d, const GlmOptions& opts = {});

/// Log-likelihoods and score vectors, exposed so fits can be checked
/// against finite differences and independent optimizers.
double poisson_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta);
Eigen::VectorXd poisson_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta);
double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta);

/// Standard normal CDF and two-sided tail probability for a z statistic.
double normal_cdf(double x);
double z_two_sided_p(double z);

/// Upper-tail probability of a chi-squared variate with k degrees of freedom.
double chi2_sf(double x, double k);

}  // namespace urbanflow::numerics
