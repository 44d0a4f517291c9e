#include "admm.hpp"

#include <cmath>

#include "errors.hpp"
#include "metrics.hpp"

namespace tlgp {

void AdmmConfig::validate() const {
  if (lambda < 0.0) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (!(rho > 0.0)) fail(ErrorCode::invalid_argument, "rho must be > 0");
  if (max_iters < 1) fail(ErrorCode::invalid_argument, "max_iters must be >= 1");
}

double soft_threshold(double v, double k) {
  if (v > k) return v - k;
  if (v < -k) return v + k;
  return 0.0;
}

AdmmResult lasso_admm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                      const AdmmConfig& cfg) {
  cfg.validate();
  if (a.rows() != y.rows()) {
    fail(ErrorCode::dimension_mismatch, "lasso: A rows != y rows");
  }
  if (!a.allFinite() || !y.allFinite()) {
    fail(ErrorCode::invalid_argument, "lasso: non-finite inputs");
  }

  const Eigen::Index n = a.cols();
  const Eigen::Index t = y.cols();
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  Eigen::MatrixXd gram = a.transpose() * a;
  gram.diagonal().array() += cfg.rho;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::numeric, "lasso: factorization of A^T A + rho I failed");
  }

  AdmmResult out;
  out.x.setZero(n, t);
  out.converged = true;

  for (Eigen::Index col = 0; col < t; ++col) {
    Eigen::VectorXd aty = a.transpose() * y.col(col);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);

    // ADMM iterates are not a descent sequence; the incumbent (best objective
    // seen) is what gets reported and returned.
    auto objective = [&](const Eigen::VectorXd& v) {
      return 0.5 * (a * v - y.col(col)).squaredNorm() +
             cfg.lambda * v.lpNorm<1>();
    };
    Eigen::VectorXd z_best = z;
    double best_obj = objective(z);

    bool col_converged = false;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
      x = llt.solve(aty + cfg.rho * (z - u));
      Eigen::VectorXd z_old = z;
      Eigen::VectorXd w = x + u;
      for (Eigen::Index i = 0; i < n; ++i) {
        z(i) = soft_threshold(w(i), cfg.lambda / cfg.rho);
      }
      u += x - z;

      double obj = objective(z);
      if (obj < best_obj) {
        best_obj = obj;
        z_best = z;
      }
      if (col == 0) out.objective_trace.push_back(best_obj);

      double r_norm = (x - z).norm();
      double s_norm = (cfg.rho * (z - z_old)).norm();
      double eps_pri = sqrt_n * cfg.abs_tol +
                       cfg.rel_tol * std::max(x.norm(), z.norm());
      double eps_dual = sqrt_n * cfg.abs_tol + cfg.rel_tol * (cfg.rho * u).norm();
      if (r_norm <= eps_pri && s_norm <= eps_dual) {
        col_converged = true;
        ++iter;
        break;
      }
    }
    out.iterations = std::max(out.iterations, iter);
    out.converged = out.converged && col_converged;
    out.x.col(col) = z_best;  // soft-thresholded iterate: exact zeros
  }
  return out;
}

double select_lambda(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                     const Eigen::MatrixXd& x_true, const AdmmConfig& base,
                     const std::vector<double>& grid_fractions,
                     double support_rel_threshold) {
  double lambda_max = (a.transpose() * y).cwiseAbs().maxCoeff();
  Eigen::MatrixXi truth = support_from_values(x_true);
  double best_lambda = grid_fractions.front() * lambda_max;
  double best_f = -1.0;
  for (double frac : grid_fractions) {
    AdmmConfig cfg = base;
    cfg.lambda = frac * lambda_max;
    AdmmResult res = lasso_admm(a, y, cfg);
    double f =
        f_measure(truth, support_from_magnitude(res.x, support_rel_threshold))
            .f_measure;
    if (f > best_f) {
      best_f = f;
      best_lambda = cfg.lambda;
    }
  }
  return best_lambda;
}

}  // namespace tlgp
