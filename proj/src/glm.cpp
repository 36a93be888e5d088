#include "tsvc/glm.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tsvc/errors.hpp"

namespace tsvc {

namespace {

constexpr double kMinWeight = 1e-10;

void check_inputs(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  Family family) {
  if (design.rows() != response.size()) {
    throw InvalidInput("design rows do not match response length");
  }
  if (design.cols() < 1) throw InvalidInput("design has no columns");
  if (design.rows() < design.cols()) {
    throw InvalidInput("underdetermined fit: n < q");
  }
  if (!design.allFinite()) throw InvalidInput("design contains non-finite values");
  if (!response.allFinite()) throw InvalidInput("response contains non-finite values");
  if (!family.is_gaussian()) {
    for (Eigen::Index i = 0; i < response.size(); ++i) {
      if (response(i) < 0.0 || response(i) > 1.0) {
        throw InvalidInput("binomial response outside [0, 1] at row " +
                           std::to_string(i + 1));
      }
    }
  }
}

[[noreturn]] void throw_rank_deficient(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                                       Eigen::Index q) {
  std::vector<int> dependent;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < q; ++k) {
    dependent.push_back(static_cast<int>(perm(k)));
  }
  std::string msg = "rank-deficient design; collinear columns:";
  for (int c : dependent) msg += " " + std::to_string(c);
  throw RankDeficient(msg, std::move(dependent));
}

Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& gram) {
  Eigen::MatrixXd inv = gram.ldlt().solve(
      Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  return 0.5 * (inv + inv.transpose());
}

double gaussian_log_likelihood(double rss, Eigen::Index n) {
  const double dn = static_cast<double>(n);
  // Maximized over the variance parameter: sigma^2_ML = RSS / n.
  return -0.5 * dn * (std::log(2.0 * M_PI * rss / dn) + 1.0);
}

GlmFit fit_gaussian(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < q) throw_rank_deficient(qr, q);

  GlmFit fit;
  fit.family = Family::gaussian();
  fit.coefficients = qr.solve(response);
  fit.deviance = (response - design * fit.coefficients).squaredNorm();
  fit.log_likelihood = gaussian_log_likelihood(fit.deviance, n);
  fit.iterations = 1;
  fit.converged = true;

  Eigen::MatrixXd unscaled = symmetric_inverse(design.transpose() * design);
  const double sigma2 = n > q ? fit.deviance / static_cast<double>(n - q) : 0.0;
  fit.covariance = sigma2 * unscaled;
  return fit;
}

GlmFit fit_binomial(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const IrlsOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < q) throw_rank_deficient(qr, q);
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 0.5);
  Eigen::VectorXd weights(n), working(n);

  double deviance = binomial_deviance(response, mu);
  bool converged = false;
  int iterations = 0;

  for (int it = 1; it <= options.max_iterations; ++it) {
    iterations = it;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::max(mu(i) * (1.0 - mu(i)), kMinWeight);
      weights(i) = w;
      working(i) = eta(i) + (response(i) - mu(i)) / w;
    }
    const Eigen::ArrayXd root_w = weights.array().sqrt();
    Eigen::MatrixXd weighted_design = root_w.matrix().asDiagonal() * design;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(weighted_design);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < q) {
      // Extreme weights collapsed the working design; keep the last iterate.
      converged = false;
      break;
    }
    beta = qr.solve((root_w * working.array()).matrix());
    eta = design * beta;
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = inverse_logit(eta(i));

    const double next = binomial_deviance(response, mu);
    const double change = std::fabs(next - deviance) / (0.1 + std::fabs(next));
    deviance = next;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  // Saturated predictors mean fitted probabilities of numerically 0 or 1
  // (quasi-separation); the estimates are usable but not a finite ML solution.
  if (converged && eta.lpNorm<Eigen::Infinity>() > 30.0) converged = false;

  GlmFit fit;
  fit.family = Family::binomial();
  fit.coefficients = beta;
  fit.deviance = deviance;
  fit.log_likelihood = -0.5 * deviance;
  fit.converged = converged;
  fit.iterations = iterations;

  Eigen::MatrixXd gram = design.transpose() * weights.asDiagonal() * design;
  fit.covariance = symmetric_inverse(gram);
  return fit;
}

}  // namespace

Eigen::VectorXd mean_response(Family family, const Eigen::VectorXd& eta) {
  if (!eta.allFinite()) throw InvalidInput("linear predictor contains non-finite values");
  if (family.is_gaussian()) return eta;
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = inverse_logit(eta(i));
  return mu;
}

double binomial_deviance(const Eigen::VectorXd& response, const Eigen::VectorXd& mu) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    const double y = response(i);
    if (y > 0.0) ll += y * std::log(std::max(mu(i), 1e-300));
    if (y < 1.0) ll += (1.0 - y) * std::log(std::max(1.0 - mu(i), 1e-300));
  }
  return -2.0 * ll;
}

GlmFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               Family family, const IrlsOptions& options) {
  check_inputs(design, response, family);
  return family.is_gaussian() ? fit_gaussian(design, response)
                              : fit_binomial(design, response, options);
}

double residual_variance(const GlmFit& fit, Eigen::Index n, Eigen::Index q) {
  if (!fit.family.is_gaussian()) {
    throw InvalidInput("residual variance is defined for the gaussian family only");
  }
  if (n <= q) throw InvalidInput("residual variance requires n > q");
  return fit.deviance / static_cast<double>(n - q);
}

}  // namespace tsvc
