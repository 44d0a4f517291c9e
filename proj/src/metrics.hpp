#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace tlgp {

/// Recovery scores. The spike convention is enforced here once: omega = 1
/// means a zero-valued component, so "non-zero support" is the omega = 0 set.
struct ScoreReport {
  double nmse = 0.0;
  double f_measure = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t true_support = 0;
  std::int64_t est_support = 0;
  std::int64_t intersection = 0;
  bool degenerate = false;  // a zero denominator was hit (empty mask)
};

/// ||X - Xhat||_F^2 / ||X||_F^2. Errors on dimension mismatch or zero truth.
double nmse(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_est);

/// Support masks (1 = non-zero component).
Eigen::MatrixXi support_from_posterior(const Eigen::MatrixXd& spike_prob);
Eigen::MatrixXi support_from_magnitude(const Eigen::MatrixXd& x_est,
                                       double rel_threshold = 1e-3);
Eigen::MatrixXi support_from_omega(const Eigen::MatrixXd& omega);
Eigen::MatrixXi support_from_values(const Eigen::MatrixXd& x_true);

/// Precision/recall/F between non-zero supports; zero denominators yield 0
/// with the degenerate flag set.
ScoreReport f_measure(const Eigen::MatrixXi& true_mask,
                      const Eigen::MatrixXi& est_mask);

/// f_measure + nmse in one report.
ScoreReport score(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_est,
                  const Eigen::MatrixXi& true_mask,
                  const Eigen::MatrixXi& est_mask);

}  // namespace tlgp
