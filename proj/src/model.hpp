#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>

#include "kernels.hpp"
#include "rng.hpp"

namespace tlgp {

/// All model constants. Defaults are the synthetic-benchmark values.
struct Hyperparams {
  double sigma2 = 1e-4;    // observation-noise variance
  double sigma2_x = 1e4;   // slab variance
  double alpha_sigma = 10.0, ell_sigma = 10.0;  // spatial kernel Sigma0
  double alpha_w = 10.0, ell_w = 15.0;          // temporal kernel W
  double eta = 0.999;      // damping coefficient
  double xi = 0.9999;      // damping decay per sweep
  double tolerance = 1e-3; // relative inf-norm convergence threshold
  int max_iters = 200;
  double neg_var_replacement = 1e10;
  bool shared_covariances = true;
  // Anchor the mu chain with a fixed N(0, W) factor at t=1 (the generative
  // model's own initial distribution). Without it the posterior is improper
  // along directions where every spike indicator agrees, and the gamma field
  // drifts until the probit scores saturate.
  bool mu1_prior = true;

  KernelKind kernel_kind = KernelKind::squared_exponential;
  std::vector<Eigen::Vector3d> locations;  // dipole kind only
  double distance_scale = 1.0;
  bool cross_axis_literal = false;
  double kernel_jitter = -1.0;  // < 0 -> 1e-6 * amplitude

  void validate() const;
  Eigen::MatrixXd spatial_kernel(int n) const;
  Eigen::MatrixXd temporal_kernel(int n) const;
};

/// Design matrix, observations, and (for synthetic data) the ground truth.
/// omega follows the spike convention: omega = 1 means the component is zero.
struct Dataset {
  Eigen::MatrixXd a;  // K x N
  Eigen::MatrixXd y;  // K x T
  std::optional<Eigen::MatrixXd> x_true;      // N x T
  std::optional<Eigen::MatrixXd> omega_true;  // N x T, 0/1

  int n() const { return static_cast<int>(a.cols()); }
  int k() const { return static_cast<int>(a.rows()); }
  int t() const { return static_cast<int>(y.cols()); }
  void validate() const;
};

struct LatentTruth {
  Eigen::MatrixXd x;      // N x T
  Eigen::MatrixXd omega;  // N x T, 0/1
  Eigen::MatrixXd gamma;  // N x T
  Eigen::MatrixXd mu;     // N x T
};

/// Forward-sample the full generative model. mu0, when given, offsets the
/// initial chain mean (used to force degenerate regimes in tests).
std::pair<Dataset, LatentTruth> sample_generative(
    const Hyperparams& h, int n, int t, int k, std::uint64_t seed,
    const Eigen::VectorXd* mu0 = nullptr);

/// Structured synthetic-data protocol: contiguous slab groups with
/// Poisson-distributed initial sizes whose borders random-walk over time.
struct GroupConfig {
  int n_groups = 2;
  double target_sparsity = 0.95;
  double value_variance = 1e4;
  double border_move_prob = 0.3;  // per direction
  double drift_bias = 0.15;       // added toward the target when engaged
  double drift_threshold = 0.10;  // relative slab-count deviation that engages drift
  void validate() const;
  // The signal length constrains the group count; checked at generation time.
  void validate_for(int n) const;
};

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> generate_structured_groups(
    int n, int t, std::uint64_t seed, const GroupConfig& cfg = {});

/// One border step: -1/0/+1 with probabilities (p - bias, 1 - 2p, p + bias).
int sample_border_move(Rng& rng, double move_prob, double bias);

/// K x N iid standard normal entries, deterministic given the seed.
Eigen::MatrixXd make_design_matrix(int k, int n, std::uint64_t seed);

/// Y = A X + noise with noise iid N(0, sigma2); sigma2 = 0 gives exact A X.
Eigen::MatrixXd observe(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x,
                        double sigma2, std::uint64_t seed);

}  // namespace tlgp
