#include "metrics.hpp"

#include "errors.hpp"

namespace tlgp {

namespace {

void check_same_shape(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2,
                      Eigen::Index c2, const char* what) {
  if (r1 != r2 || c1 != c2) {
    fail(ErrorCode::dimension_mismatch, std::string(what) + ": " +
                                            std::to_string(r1) + "x" +
                                            std::to_string(c1) + " vs " +
                                            std::to_string(r2) + "x" +
                                            std::to_string(c2));
  }
}

}  // namespace

double nmse(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_est) {
  check_same_shape(x_true.rows(), x_true.cols(), x_est.rows(), x_est.cols(),
                   "nmse shapes differ");
  double denom = x_true.squaredNorm();
  if (denom <= 0.0) {
    fail(ErrorCode::invalid_argument, "nmse undefined for zero true signal");
  }
  return (x_true - x_est).squaredNorm() / denom;
}

Eigen::MatrixXi support_from_posterior(const Eigen::MatrixXd& spike_prob) {
  return (spike_prob.array() < 0.5).cast<int>();
}

Eigen::MatrixXi support_from_magnitude(const Eigen::MatrixXd& x_est,
                                       double rel_threshold) {
  double tau = rel_threshold * x_est.cwiseAbs().maxCoeff();
  return (x_est.cwiseAbs().array() > tau).cast<int>();
}

Eigen::MatrixXi support_from_omega(const Eigen::MatrixXd& omega) {
  return (omega.array() < 0.5).cast<int>();
}

Eigen::MatrixXi support_from_values(const Eigen::MatrixXd& x_true) {
  return (x_true.array() != 0.0).cast<int>();
}

ScoreReport f_measure(const Eigen::MatrixXi& true_mask,
                      const Eigen::MatrixXi& est_mask) {
  check_same_shape(true_mask.rows(), true_mask.cols(), est_mask.rows(),
                   est_mask.cols(), "f_measure shapes differ");
  ScoreReport r;
  r.true_support = (true_mask.array() != 0).count();
  r.est_support = (est_mask.array() != 0).count();
  r.intersection = ((true_mask.array() != 0) && (est_mask.array() != 0)).count();
  if (r.est_support > 0) {
    r.precision = static_cast<double>(r.intersection) / r.est_support;
  } else {
    r.degenerate = true;
  }
  if (r.true_support > 0) {
    r.recall = static_cast<double>(r.intersection) / r.true_support;
  } else {
    r.degenerate = true;
  }
  if (r.precision + r.recall > 0.0) {
    r.f_measure = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

ScoreReport score(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_est,
                  const Eigen::MatrixXi& true_mask,
                  const Eigen::MatrixXi& est_mask) {
  ScoreReport r = f_measure(true_mask, est_mask);
  r.nmse = nmse(x_true, x_est);
  return r;
}

}  // namespace tlgp
