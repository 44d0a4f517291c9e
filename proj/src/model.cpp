#include "model.hpp"

#include <cmath>

#include "errors.hpp"
#include "expfam.hpp"

namespace tlgp {

void Hyperparams::validate() const {
  if (!(sigma2 > 0.0)) fail(ErrorCode::invalid_argument, "sigma2 must be > 0");
  if (!(sigma2_x > 0.0))
    fail(ErrorCode::invalid_argument, "sigma_x2 must be > 0");
  if (!(eta > 0.0 && eta <= 1.0))
    fail(ErrorCode::invalid_argument, "eta must be in (0, 1]");
  if (!(xi > 0.0 && xi <= 1.0))
    fail(ErrorCode::invalid_argument, "xi must be in (0, 1]");
  if (!(tolerance > 0.0))
    fail(ErrorCode::invalid_argument, "tolerance must be > 0");
  if (max_iters < 1) fail(ErrorCode::invalid_argument, "max_iters must be >= 1");
  if (!(neg_var_replacement > 0.0))
    fail(ErrorCode::invalid_argument, "neg_var_replacement must be > 0");
  if (!(alpha_sigma > 0.0 && ell_sigma > 0.0 && alpha_w > 0.0 && ell_w > 0.0))
    fail(ErrorCode::invalid_argument, "kernel parameters must be positive");
  if (kernel_kind == KernelKind::dipole && locations.empty())
    fail(ErrorCode::invalid_argument, "dipole kernel requires locations");
}

Eigen::MatrixXd Hyperparams::spatial_kernel(int n) const {
  KernelSpec spec;
  spec.kind = kernel_kind;
  spec.amplitude = alpha_sigma;
  spec.lengthscale = ell_sigma;
  spec.jitter = kernel_jitter;
  spec.locations = locations;
  spec.distance_scale = distance_scale;
  spec.cross_axis_literal = cross_axis_literal;
  return build_kernel(spec, n);
}

Eigen::MatrixXd Hyperparams::temporal_kernel(int n) const {
  KernelSpec spec;
  spec.kind = kernel_kind;
  spec.amplitude = alpha_w;
  spec.lengthscale = ell_w;
  spec.jitter = kernel_jitter;
  spec.locations = locations;
  spec.distance_scale = distance_scale;
  spec.cross_axis_literal = cross_axis_literal;
  return build_kernel(spec, n);
}

void Dataset::validate() const {
  if (a.rows() != y.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "A has " + std::to_string(a.rows()) + " rows but Y has " +
             std::to_string(y.rows()));
  }
  if (x_true && (x_true->rows() != a.cols() || x_true->cols() != y.cols())) {
    fail(ErrorCode::dimension_mismatch, "X truth shape does not match A/Y");
  }
  if (omega_true &&
      (omega_true->rows() != a.cols() || omega_true->cols() != y.cols())) {
    fail(ErrorCode::dimension_mismatch, "Omega truth shape does not match A/Y");
  }
}

namespace {

Eigen::VectorXd sample_mvn(Rng& rng, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd c = ensure_psd(cov, 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + llt.matrixL() * z;
}

}  // namespace

std::pair<Dataset, LatentTruth> sample_generative(const Hyperparams& h, int n,
                                                  int t, int k,
                                                  std::uint64_t seed,
                                                  const Eigen::VectorXd* mu0) {
  if (n < 1 || t < 1 || k < 1) {
    fail(ErrorCode::invalid_argument, "N, T, K must all be >= 1");
  }
  h.validate();

  Eigen::MatrixXd w = h.temporal_kernel(n);
  Eigen::MatrixXd sigma0 = h.spatial_kernel(n);

  Dataset d;
  d.a = make_design_matrix(k, n, derive_seed(seed, 0));

  LatentTruth truth;
  truth.x.setZero(n, t);
  truth.omega.setZero(n, t);
  truth.gamma.setZero(n, t);
  truth.mu.setZero(n, t);

  Rng chain(derive_seed(seed, 1));
  Eigen::VectorXd base = mu0 ? *mu0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu_prev;
  for (int s = 0; s < t; ++s) {
    Eigen::VectorXd mean = (s == 0) ? base : mu_prev;
    Eigen::VectorXd mu_t = sample_mvn(chain, mean, w);
    truth.mu.col(s) = mu_t;
    truth.gamma.col(s) = sample_mvn(chain, mu_t, sigma0);
    mu_prev = mu_t;
  }

  Rng spikes(derive_seed(seed, 2));
  Rng values(derive_seed(seed, 3));
  const double sx = std::sqrt(h.sigma2_x);
  for (int s = 0; s < t; ++s) {
    for (int i = 0; i < n; ++i) {
      bool spike = spikes.uniform() < probit(truth.gamma(i, s));
      truth.omega(i, s) = spike ? 1.0 : 0.0;
      truth.x(i, s) = spike ? 0.0 : values.normal(0.0, sx);
    }
  }

  d.y = observe(d.a, truth.x, h.sigma2, derive_seed(seed, 4));
  d.x_true = truth.x;
  d.omega_true = truth.omega;
  return {std::move(d), std::move(truth)};
}

void GroupConfig::validate() const {
  if (n_groups < 1) fail(ErrorCode::invalid_argument, "n_groups must be >= 1");
  if (!(target_sparsity > 0.0 && target_sparsity < 1.0))
    fail(ErrorCode::invalid_argument, "target_sparsity must be in (0, 1)");
  if (!(value_variance > 0.0))
    fail(ErrorCode::invalid_argument, "value_variance must be > 0");
  if (!(border_move_prob > 0.0 &&
        border_move_prob + drift_bias <= 0.5))
    fail(ErrorCode::invalid_argument,
         "border_move_prob + drift_bias must lie in (0, 0.5]");
}

void GroupConfig::validate_for(int n) const {
  validate();
  if (n * (1.0 - target_sparsity) + 1e-9 < n_groups)
    fail(ErrorCode::invalid_argument,
         "target slab count smaller than the number of groups");
}

int sample_border_move(Rng& rng, double move_prob, double bias) {
  double p_plus = move_prob + bias;
  double p_minus = move_prob - bias;
  double u = rng.uniform();
  if (u < p_minus) return -1;
  if (u < p_minus + p_plus) return 1;
  return 0;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> generate_structured_groups(
    int n, int t, std::uint64_t seed, const GroupConfig& cfg) {
  if (n < 1 || t < 1) fail(ErrorCode::invalid_argument, "N, T must be >= 1");
  cfg.validate_for(n);

  Rng rng(derive_seed(seed, 10));
  const double target_count = n * (1.0 - cfg.target_sparsity);
  const double poisson_mean = target_count / cfg.n_groups;

  // Half-open slab intervals [lo, hi); empty groups are legal after clipping.
  struct Interval {
    int lo, hi;
  };
  std::vector<Interval> groups;
  for (int g = 0; g < cfg.n_groups; ++g) {
    int len = 0;
    while (len == 0) len = rng.poisson(poisson_mean);
    len = std::min(len, n);
    int lo = static_cast<int>(rng.uniform_below(n - len + 1));
    groups.push_back({lo, lo + len});
  }

  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, t);
  auto stamp = [&](int col) {
    for (const auto& g : groups)
      for (int i = g.lo; i < g.hi; ++i) mask(i, col) = 1.0;
  };
  stamp(0);

  for (int s = 1; s < t; ++s) {
    // Mean-reverting bias engages when the slab count drifts >10% off target.
    double count = mask.col(s - 1).sum();
    double bias = 0.0;
    if (count > (1.0 + cfg.drift_threshold) * target_count) bias = cfg.drift_bias;
    if (count < (1.0 - cfg.drift_threshold) * target_count) bias = -cfg.drift_bias;
    for (auto& g : groups) {
      // Shrinking means lo drifts up and hi drifts down.
      int dlo = sample_border_move(rng, cfg.border_move_prob, bias);
      int dhi = sample_border_move(rng, cfg.border_move_prob, -bias);
      g.lo = std::clamp(g.lo + dlo, 0, n);
      g.hi = std::clamp(g.hi + dhi, g.lo, n);
    }
    stamp(s);
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, t);
  Eigen::MatrixXd omega(n, t);
  const double sd = std::sqrt(cfg.value_variance);
  Rng values(derive_seed(seed, 11));
  for (int s = 0; s < t; ++s) {
    for (int i = 0; i < n; ++i) {
      if (mask(i, s) > 0.5) {
        double v = 0.0;
        while (v == 0.0) v = values.normal(0.0, sd);
        x(i, s) = v;
        omega(i, s) = 0.0;
      } else {
        omega(i, s) = 1.0;
      }
    }
  }
  return {std::move(x), std::move(omega)};
}

Eigen::MatrixXd make_design_matrix(int k, int n, std::uint64_t seed) {
  if (k < 1 || n < 1) fail(ErrorCode::invalid_argument, "K, N must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd a(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a;
}

Eigen::MatrixXd observe(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x,
                        double sigma2, std::uint64_t seed) {
  if (a.cols() != x.rows()) {
    fail(ErrorCode::dimension_mismatch, "observe: A columns != X rows");
  }
  if (sigma2 < 0.0) fail(ErrorCode::invalid_argument, "sigma2 must be >= 0");
  Eigen::MatrixXd y = a * x;
  if (sigma2 > 0.0) {
    Rng rng(seed);
    const double sd = std::sqrt(sigma2);
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += rng.normal(0.0, sd);
  }
  return y;
}

}  // namespace tlgp
