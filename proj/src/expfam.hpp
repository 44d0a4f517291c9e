#pragma once

#include <Eigen/Dense>

#include "errors.hpp"

namespace tlgp {

// ---------------------------------------------------------------------------
// Gaussian distributions in natural parameters.
//
// Messages are kept in (precision, precision*mean) form throughout: quotients
// of Gaussians can have zero or negative precision, which has no moment-form
// representation, and posterior assembly is a plain sum of natural parameters.
// ---------------------------------------------------------------------------

/// Multivariate Gaussian in natural parameters. `precision` may be indefinite
/// or zero (quotients produce such values); moment conversion is only defined
/// when it is positive definite.
struct GaussianNat {
  Eigen::MatrixXd precision;  // symmetric
  Eigen::VectorXd shift;      // precision * mean

  GaussianNat() = default;
  GaussianNat(Eigen::MatrixXd prec, Eigen::VectorXd sh);

  static GaussianNat vague(Eigen::Index dim);
  static GaussianNat from_moments(const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov);

  Eigen::Index dim() const { return shift.size(); }

  /// Moment form (mean, covariance). Throws ErrorCode::numeric when the
  /// precision is not positive definite.
  void to_moments(Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const;

  bool symmetric(double rel_tol = 1e-12) const;
};

/// 1-D specialization used by the per-component factor updates.
struct Gaussian1 {
  double precision = 0.0;
  double shift = 0.0;

  static Gaussian1 from_moments(double mean, double var) {
    return {1.0 / var, mean / var};
  }
  double variance() const { return 1.0 / precision; }
  double mean() const { return shift / precision; }
};

GaussianNat gaussian_product(const GaussianNat& a, const GaussianNat& b);
GaussianNat gaussian_quotient(const GaussianNat& a, const GaussianNat& b);

inline Gaussian1 gaussian_product(Gaussian1 a, Gaussian1 b) {
  return {a.precision + b.precision, a.shift + b.shift};
}
inline Gaussian1 gaussian_quotient(Gaussian1 a, Gaussian1 b) {
  return {a.precision - b.precision, a.shift - b.shift};
}

// ---------------------------------------------------------------------------
// Probit-parameterized Bernoulli distributions: success probability Phi(z).
//
// Scores are clamped to |z| <= kProbitClamp, the range over which Phi is
// numerically distinguishable from 0/1 at kProbEps resolution. The clamp
// policy is ours; the source model does not specify one.
// ---------------------------------------------------------------------------

inline constexpr double kProbEps = 1e-15;
inline constexpr double kProbitClamp = 8.0;

/// Standard Gaussian cdf. Exact at +-infinity.
double probit(double z);

/// Inverse cdf; p is clamped to [kProbEps, 1 - kProbEps] first.
double probit_inv(double p);

/// log Phi(z), stable in the lower tail.
double log_probit(double z);

/// Natural parameter of Ber(Phi(z)): log(Phi(z)/(1-Phi(z))).
double logit_probit(double z);

/// Inverse of logit_probit, clamped to [-kProbitClamp, kProbitClamp].
double probit_from_logit(double logodds);

/// Product of two probit-Bernoullis: t(z1, z2). Symmetric. Errors when the
/// inputs are degenerate and contradictory (one beyond +clamp, other beyond
/// -clamp).
double bernoulli_product(double z1, double z2);

/// Quotient of two probit-Bernoullis: d(z1, z2). Errors when Phi(z2) is
/// exactly 0 or 1 in double precision.
double bernoulli_quotient(double z1, double z2);

// Gaussian pdf helpers shared by the tilted-moment formulas.
double norm_pdf(double x);
double norm_pdf(double x, double mean, double var);
double log_norm_pdf(double x);

}  // namespace tlgp
