#ifndef TSVC_GLM_HPP
#define TSVC_GLM_HPP

#include <Eigen/Dense>

#include "tsvc/family.hpp"

namespace tsvc {

/// Maximum-likelihood fit of a generalized linear model.
///
/// `covariance` is the inverse observed Fisher information at the solution;
/// for the Gaussian family it is scaled by the residual variance RSS/(n-q).
/// `deviance` equals the residual sum of squares for the Gaussian family and
/// -2 * log-likelihood for the binomial family (saturated binary fit has
/// log-likelihood zero).
struct GlmFit {
  Family family;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double deviance = 0.0;
  double log_likelihood = 0.0;
  bool converged = true;
  int iterations = 0;

  double standard_error(Eigen::Index j) const {
    const double v = covariance(j, j);
    return v > 0.0 ? std::sqrt(v) : 0.0;
  }
};

struct IrlsOptions {
  double tolerance = 1e-8;  // relative deviance change
  int max_iterations = 50;
};

/// Fits by least squares (Gaussian) or IRLS (binomial). The design must have
/// full column rank; a rank-deficient design raises RankDeficient naming the
/// dependent columns. Binomial responses may be fractional in [0, 1] (needed
/// when fitting against an expected outcome rather than observed 0/1 data).
///
/// Quasi-separated logistic fits do not raise: the iteration-capped estimates
/// are returned with `converged == false` so callers can count failures.
GlmFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               Family family, const IrlsOptions& options = {});

/// RSS / (n - q) for a Gaussian fit; raises for binomial fits or n <= q.
double residual_variance(const GlmFit& fit, Eigen::Index n, Eigen::Index q);

/// Binomial deviance -2 sum[y log mu + (1-y) log(1-mu)]; accepts fractional y.
double binomial_deviance(const Eigen::VectorXd& response, const Eigen::VectorXd& mu);

// Relative pivot cutoff used for rank detection in all decompositions.
inline constexpr double kRankTolerance = 1e-10;

}  // namespace tsvc

#endif
