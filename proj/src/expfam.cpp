#include "expfam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tlgp {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLog2Pi = 1.8378770664093455;
constexpr double kSqrt2Pi = 2.5066282746310002;

void check_same_dim(const GaussianNat& a, const GaussianNat& b) {
  if (a.dim() != b.dim() || a.precision.rows() != b.precision.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "gaussian dimension mismatch: " + std::to_string(a.dim()) + " vs " +
             std::to_string(b.dim()));
  }
}

}  // namespace

GaussianNat::GaussianNat(Eigen::MatrixXd prec, Eigen::VectorXd sh)
    : precision(std::move(prec)), shift(std::move(sh)) {
  if (precision.rows() != precision.cols() ||
      precision.rows() != shift.size()) {
    fail(ErrorCode::dimension_mismatch,
         "gaussian natural parameters have inconsistent shapes");
  }
}

GaussianNat GaussianNat::vague(Eigen::Index dim) {
  return {Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};
}

GaussianNat GaussianNat::from_moments(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::numeric, "covariance is not positive definite");
  }
  Eigen::MatrixXd prec =
      llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  prec = 0.5 * (prec + prec.transpose()).eval();
  return {prec, llt.solve(mean)};
}

void GaussianNat::to_moments(Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::numeric,
         "precision is not positive definite; moment form undefined");
  }
  cov = llt.solve(Eigen::MatrixXd::Identity(dim(), dim()));
  cov = 0.5 * (cov + cov.transpose()).eval();
  mean = llt.solve(shift);
}

bool GaussianNat::symmetric(double rel_tol) const {
  double scale = std::max(1.0, precision.cwiseAbs().maxCoeff());
  return (precision - precision.transpose()).cwiseAbs().maxCoeff() <=
         rel_tol * scale;
}

GaussianNat gaussian_product(const GaussianNat& a, const GaussianNat& b) {
  check_same_dim(a, b);
  return {a.precision + b.precision, a.shift + b.shift};
}

GaussianNat gaussian_quotient(const GaussianNat& a, const GaussianNat& b) {
  check_same_dim(a, b);
  return {a.precision - b.precision, a.shift - b.shift};
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double norm_pdf(double x, double mean, double var) {
  double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

double log_norm_pdf(double x) { return -0.5 * (kLog2Pi + x * x); }

double probit(double z) {
  if (std::isnan(z)) return z;
  if (z == std::numeric_limits<double>::infinity()) return 1.0;
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  return 0.5 * std::erfc(-z / kSqrt2);
}

double log_probit(double z) {
  if (z > -1.0) {
    // Phi >= 0.158 here, log1p of the complement is accurate.
    return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  }
  double v = 0.5 * std::erfc(-z / kSqrt2);
  if (v > 0.0) return std::log(v);
  // erfc underflowed (z below about -37.5): tail expansion.
  double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * kLog2Pi +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double probit_inv(double p) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);

  // Acklam's rational approximation, then two Halley refinements with the
  // exact cdf bring the result to full double accuracy.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};

  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  for (int i = 0; i < 2; ++i) {
    double e = probit(x) - p;
    double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double logit_probit(double z) { return log_probit(z) - log_probit(-z); }

double probit_from_logit(double logodds) {
  const double lmax = logit_probit(kProbitClamp);
  if (logodds >= lmax) return kProbitClamp;
  if (logodds <= -lmax) return -kProbitClamp;

  // Stable sigmoid for the initial guess, then Newton on the exact logit.
  double p = logodds >= 0 ? 1.0 / (1.0 + std::exp(-logodds))
                          : std::exp(logodds) / (1.0 + std::exp(logodds));
  double z = probit_inv(p);
  for (int i = 0; i < 4; ++i) {
    double g = logit_probit(z) - logodds;
    double lpdf = log_norm_pdf(z);
    double deriv = std::exp(lpdf - log_probit(z)) + std::exp(lpdf - log_probit(-z));
    double step = g / deriv;
    z -= step;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(z))) break;
  }
  return std::clamp(z, -kProbitClamp, kProbitClamp);
}

double bernoulli_product(double z1, double z2) {
  if ((z1 > kProbitClamp && z2 < -kProbitClamp) ||
      (z1 < -kProbitClamp && z2 > kProbitClamp)) {
    fail(ErrorCode::invalid_argument,
         "bernoulli product of contradictory degenerate factors");
  }
  z1 = std::clamp(z1, -kProbitClamp, kProbitClamp);
  z2 = std::clamp(z2, -kProbitClamp, kProbitClamp);
  return probit_from_logit(logit_probit(z1) + logit_probit(z2));
}

double bernoulli_quotient(double z1, double z2) {
  double p2 = probit(z2);
  if (p2 == 0.0 || p2 == 1.0) {
    fail(ErrorCode::invalid_argument,
         "bernoulli quotient by a degenerate factor");
  }
  z1 = std::clamp(z1, -kProbitClamp, kProbitClamp);
  z2 = std::clamp(z2, -kProbitClamp, kProbitClamp);
  return probit_from_logit(logit_probit(z1) - logit_probit(z2));
}

}  // namespace tlgp
