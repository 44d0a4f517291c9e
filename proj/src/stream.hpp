#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ep.hpp"
#include "model.hpp"

namespace tlgp {

/// Online Bayesian filtering: warm start from offline inference on a prefix,
/// then per-timestamp (or minibatch) predict/update cycles. Carries only the
/// mu posterior (e, D) forward; past observations are never reprocessed.
class StreamState {
 public:
  /// Runs offline EP on the prefix (y columns 1..T_init) and extracts the mu
  /// posterior at the last prefix timestamp.
  StreamState(const Dataset& prefix, const Hyperparams& h);

  /// Predicted mu prior for the next block: mean carries over, covariance
  /// grows by the temporal kernel (D_pred = W + D).
  Moments predict() const;

  /// Runs the EP engine on the M new timestamps with the predicted prior as
  /// a fixed (never refined) factor on the block's first mu.
  void update(const Eigen::MatrixXd& y_block);

  /// predict + update with M = 1.
  void step(const Eigen::VectorXd& y_col);

  int timestamp() const { return t_; }

  // Accumulated posterior summaries (prefix + every processed block).
  const Eigen::MatrixXd& xhat() const { return xhat_; }
  const Eigen::MatrixXd& spike_prob() const { return spike_prob_; }
  const Eigen::MatrixXd& gamma_mean() const { return gamma_mean_; }
  const Eigen::MatrixXd& mu_mean_history() const { return mu_mean_; }

  const Eigen::VectorXd& mu_mean() const { return e_; }
  const Eigen::MatrixXd& mu_cov() const { return d_; }

  const EpDiagnostics& init_diagnostics() const { return init_diag_; }
  const std::vector<EpDiagnostics>& block_diagnostics() const {
    return block_diags_;
  }

 private:
  void absorb(const OfflineResult& res);

  Hyperparams hp_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd w_;
  Eigen::VectorXd e_;  // mu posterior mean at the current timestamp
  Eigen::MatrixXd d_;  // mu posterior covariance

  Eigen::MatrixXd xhat_, spike_prob_, gamma_mean_, mu_mean_;
  int t_ = 0;

  EpDiagnostics init_diag_;
  std::vector<EpDiagnostics> block_diags_;
};

}  // namespace tlgp
