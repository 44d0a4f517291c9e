#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tlgp {

struct AdmmConfig {
  double lambda = 0.1;  // l1 weight, >= 0
  double rho = 1.0;     // penalty parameter, > 0
  int max_iters = 2000;
  double abs_tol = 1e-6;
  double rel_tol = 1e-5;
  void validate() const;
};

struct AdmmResult {
  Eigen::MatrixXd x;  // N x T minimizers, column per observation vector
  int iterations = 0;        // max over columns
  bool converged = false;    // all columns hit the residual tolerances
  // Incumbent (best-so-far) objective per iteration for the first column.
  std::vector<double> objective_trace;
};

/// Approximate minimizer of 0.5||Ax - y||^2 + lambda||x||_1 per column of y,
/// by ADMM splitting with soft thresholding. The (A^T A + rho I) factorization
/// is computed once and shared across columns and iterations.
AdmmResult lasso_admm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                      const AdmmConfig& cfg);

/// Pick lambda from `grid_fractions * ||A^T y||_inf` by F-measure against the
/// held-out truth; used by the benchmark harness to freeze the baseline's
/// regularization deterministically.
double select_lambda(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                     const Eigen::MatrixXd& x_true, const AdmmConfig& base,
                     const std::vector<double>& grid_fractions,
                     double support_rel_threshold);

double soft_threshold(double v, double k);

}  // namespace tlgp
