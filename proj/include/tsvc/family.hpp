#ifndef TSVC_FAMILY_HPP
#define TSVC_FAMILY_HPP

#include <Eigen/Dense>
#include <string>

#include "tsvc/stats.hpp"

namespace tsvc {

enum class FamilyKind { gaussian_identity, binomial_logit };

/// Outcome distribution plus link. Gaussian pairs the identity link,
/// binomial the logit link.
struct Family {
  FamilyKind kind = FamilyKind::gaussian_identity;

  static Family gaussian() { return {FamilyKind::gaussian_identity}; }
  static Family binomial() { return {FamilyKind::binomial_logit}; }

  bool is_gaussian() const { return kind == FamilyKind::gaussian_identity; }

  double inverse_link(double eta) const {
    return is_gaussian() ? eta : inverse_logit(eta);
  }

  std::string name() const { return is_gaussian() ? "gaussian" : "binomial"; }
};

/// Applies the inverse link elementwise, E(Y | X) = g^{-1}(eta).
Eigen::VectorXd mean_response(Family family, const Eigen::VectorXd& eta);

}  // namespace tsvc

#endif
