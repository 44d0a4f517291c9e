#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "expfam.hpp"
#include "model.hpp"

namespace tlgp {

// ---------------------------------------------------------------------------
// Tilted-distribution moments (closed forms behind the per-component factor
// refinements). Both are cross-checked against adaptive quadrature in the
// test suite.
// ---------------------------------------------------------------------------

struct TiltedMoments {
  double z_norm = 0.0;   // normalizer of the tilted density
  double first = 0.0;    // E[latent]
  double second = 0.0;   // E[latent^2]
  double e_omega = 0.0;  // E[spike indicator]
};

/// Spike-and-slab factor: tilted density
///   N(x; cav_mean, cav_var) * [Phi(z_cav) delta_0(x)
///                              + (1 - Phi(z_cav)) N(x; 0, slab_var)].
TiltedMoments tilted_f_moments(double cav_mean, double cav_var, double z_cav,
                               double slab_var);

/// Probit-link factor: tilted density over gamma
///   N(gamma; cav_mean, cav_var) * [Phi(z_cav) Phi(gamma)
///                                  + (1 - Phi(z_cav)) (1 - Phi(gamma))].
TiltedMoments tilted_h_moments(double cav_mean, double cav_var, double z_cav);

/// Message a Gaussian coupling factor N(left; right, coupling_cov) sends to
/// one side given the other side's cavity moments: the refined factor is
/// exactly N(.; cavity_mean, cavity_cov + coupling_cov) (the cavity terms
/// cancel during the factor update), returned in natural parameters.
GaussianNat gp_coupling_message(const Eigen::VectorXd& cavity_mean,
                                const Eigen::MatrixXd& cavity_cov,
                                const Eigen::MatrixXd& coupling_cov);

// ---------------------------------------------------------------------------
// Damping: q^damp = (q^new)^eta (q^old)^(1-eta), i.e. a convex combination of
// natural parameters; probit scores are interpolated in log-odds space.
// ---------------------------------------------------------------------------

Gaussian1 damp(const Gaussian1& next, const Gaussian1& prev, double eta);
GaussianNat damp(const GaussianNat& next, const GaussianNat& prev, double eta);
double damp_probit(double z_next, double z_prev, double eta);

/// Moment form of a natural-parameter Gaussian with escalating diagonal
/// jitter (vague and mildly indefinite precisions become proper, wide
/// Gaussians; the escalation doubles the jitter up to 7 times). Returns
/// nullopt when no escalation step yields a usable factorization.
/// `vague_jitter` sets the repair precision for an all-vague input, i.e. the
/// reciprocal of the variance a fully uninformative cavity is widened to.
struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
std::optional<Moments> try_moments(const Eigen::MatrixXd& precision,
                                   const Eigen::VectorXd& shift,
                                   double vague_jitter = 1e-6);

// ---------------------------------------------------------------------------
// EP engine state
// ---------------------------------------------------------------------------

struct SweepStats {
  double eta_used = 1.0;
  int negative_variances = 0;
  int skipped = 0;
};

struct EpSweepRecord {
  double change = 0.0;  // relative inf-norm change of Xhat
  double eta = 0.0;
  int negative_variances = 0;
  int skipped = 0;
};

struct EpDiagnostics {
  std::vector<EpSweepRecord> sweeps;
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

struct PosteriorSummary {
  Eigen::MatrixXd xhat;        // N x T posterior means
  Eigen::MatrixXd x_var;       // N x T posterior variances
  Eigen::MatrixXd spike_prob;  // N x T, Phi(z_it)
  Eigen::MatrixXd gamma_mean;  // N x T
  Eigen::MatrixXd mu_mean;     // N x T
};

struct EpOptions {
  /// Fixed Gaussian factor on mu at the first timestamp. Used by the
  /// streaming update blocks; never refined by the EP iterations.
  std::optional<GaussianNat> mu_prior_first;
};

/// Factor-state storage and the four factor refinements. All factors are kept
/// in natural parameters; refinable factors start vague (zero precision, zero
/// shift, probit score 0) and the g factors are fixed at A^T A / sigma2,
/// A^T y_t / sigma2. Covariance matrices of the h/r/u factors are shared
/// across timestamps unless Hyperparams::shared_covariances is off.
class EpState {
 public:
  EpState(const Dataset& d, const Hyperparams& h, EpOptions opts = {});

  int n() const { return n_; }
  int t_len() const { return t_; }
  double eta() const { return eta_; }

  void update_f(int t);
  void update_h(int t);
  void update_r(int t);
  void update_u(int t);  // t >= 1; couples mu_{t-1} and mu_t

  /// One full schedule pass: for each t run f, h, r and (t >= 1) u, then
  /// decay eta by xi. Returns the counters accumulated during the pass.
  SweepStats sweep();

  /// Marginals assembled from the natural-parameter sums of the current
  /// factors (Eqs. of the posterior assembly; recomputed on every call).
  GaussianNat x_marginal_nat(int t) const;
  GaussianNat gamma_marginal_nat(int t) const;
  GaussianNat mu_marginal_nat(int t) const;
  double omega_score(int i, int t) const;  // z_it

  /// Posterior means of x only (cheap path for the convergence check).
  Eigen::MatrixXd xhat() const;

  /// Full marginal refresh.
  PosteriorSummary make_summary() const;

  const std::optional<GaussianNat>& mu_prior() const {
    return opts_.mu_prior_first;
  }

  // Test access to per-site factor parameters.
  Gaussian1 f_site(int i, int t) const { return {f_prec_(i, t), f_shift_(i, t)}; }
  double z_f(int i, int t) const { return z_f_(i, t); }
  double z_h(int i, int t) const { return z_h_(i, t); }

 private:
  int cov_idx(int t) const { return hp_.shared_covariances ? 0 : t; }
  Moments moments_or_throw(const GaussianNat& nat, const char* what,
                           int t) const;
  // Damps msg against the stored (shared precision, per-t mean) factor part
  // and writes it back. Shared covariances follow the last-writer convention;
  // storing per-t means keeps the other timestamps' factor means fixed when
  // the shared matrix changes.
  void write_coupled_part(std::vector<Eigen::MatrixXd>& prec_store,
                          Eigen::MatrixXd& mean_store, int ci, int t,
                          const GaussianNat& msg, const char* what);

  Hyperparams hp_;
  EpOptions opts_;
  int n_ = 0, t_ = 0;
  double eta_ = 1.0;
  // Vague cavities are repaired to a variance of 100x the combined kernel
  // amplitude, the natural scale of the gamma/mu subsystem; much wider and
  // the probit moment matching throws the first gamma means to +-sqrt(var).
  double vague_jitter_ = 1e-6;

  Eigen::MatrixXd sigma0_, w_;

  Eigen::MatrixXd g_prec_;   // N x N, shared across t
  Eigen::MatrixXd g_shift_;  // N x T

  Eigen::MatrixXd f_prec_, f_shift_, z_f_;  // N x T (diagonal sites)

  Eigen::MatrixXd h_prec_;         // N x 1 (shared) or N x T, diagonal
  Eigen::MatrixXd h_mean_, z_h_;   // N x T

  std::vector<Eigen::MatrixXd> r_gamma_prec_, r_mu_prec_;  // 1 or T matrices
  Eigen::MatrixXd r_gamma_mean_, r_mu_mean_;               // N x T

  std::vector<Eigen::MatrixXd> u_fwd_prec_, u_bwd_prec_;  // 1 or T matrices
  Eigen::MatrixXd u_fwd_mean_, u_bwd_mean_;  // N x T, column t = factor over
                                             // (mu_{t-1}, mu_t), t >= 1

  SweepStats stats_;
};

struct OfflineResult {
  PosteriorSummary posterior;
  EpDiagnostics diagnostics;
  GaussianNat mu_last;  // mu marginal at the final timestamp
};

/// Batch EP: sweeps until the relative inf-norm change of Xhat drops below
/// the tolerance or max_iters is reached.
OfflineResult run_offline(const Dataset& d, const Hyperparams& h,
                          EpOptions opts = {});

}  // namespace tlgp
