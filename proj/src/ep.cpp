#include "ep.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "kernels.hpp"

namespace tlgp {

namespace {

// Underflow guard on the tilted normalizer: a skip must only fire when the
// mass is numerically meaningless, not merely when the data surprises a
// near-degenerate cavity (a small-but-representable Z is exactly the signal
// that flips a wrongly pinned component back).
constexpr double kTiltedFloor = 1e-300;
constexpr double kVarFloor = 1e-250;
constexpr double kCovCap = 1e12;  // sanity cap on recovered variances

// Site precisions are capped so that cavity extraction (1/V_ii - lambda_i)
// stays numerically meaningful against the likelihood-scale precisions; an
// uncapped decisive site grows without bound sweep over sweep.
constexpr double kSitePrecCap = 1e12;

void cap_site(Gaussian1& site) {
  if (site.precision > kSitePrecCap) {
    site.shift *= kSitePrecCap / site.precision;
    site.precision = kSitePrecCap;
  }
}

bool usable_moments(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean) {
  if (!cov.allFinite() || !mean.allFinite()) return false;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    double v = cov(i, i);
    if (!(v > 0.0) || v > kCovCap) return false;
  }
  return true;
}

}  // namespace

std::optional<Moments> try_moments(const Eigen::MatrixXd& precision,
                                   const Eigen::VectorXd& shift,
                                   double vague_jitter) {
  const Eigen::Index n = precision.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  double base = precision.diagonal().cwiseAbs().mean();
  double jitter = std::max(1e-9 * base, vague_jitter);
  double added = 0.0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    Eigen::MatrixXd p = added > 0.0 ? (precision + added * id).eval() : precision;
    Eigen::LLT<Eigen::MatrixXd> llt(p);
    // A singular-but-PSD matrix can slip through LLT with rounding-level
    // pivots and yield a garbage solve; the rcond estimate catches that.
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) {
      Moments m;
      m.cov = llt.solve(id);
      m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
      m.mean = llt.solve(shift);
      if (usable_moments(m.cov, m.mean)) return m;
    }
    added = added > 0.0 ? added * 2.0 : jitter;
  }
  return std::nullopt;
}

TiltedMoments tilted_f_moments(double cav_mean, double cav_var, double z_cav,
                               double slab_var) {
  TiltedMoments m;
  const double p = probit(z_cav);
  const double n_spike = norm_pdf(0.0, cav_mean, cav_var);
  const double vs = cav_var + slab_var;
  const double n_slab = norm_pdf(0.0, cav_mean, vs);
  m.z_norm = p * n_spike + (1.0 - p) * n_slab;
  if (m.z_norm <= 0.0) return m;
  // Slab branch is the product Gaussian N(x; mt, vt) with mass n_slab.
  const double mt = cav_mean * slab_var / vs;
  const double vt = cav_var * slab_var / vs;
  const double w_slab = (1.0 - p) * n_slab / m.z_norm;
  m.first = w_slab * mt;
  m.second = w_slab * (mt * mt + vt);
  m.e_omega = p * n_spike / m.z_norm;
  return m;
}

TiltedMoments tilted_h_moments(double cav_mean, double cav_var, double z_cav) {
  TiltedMoments m;
  const double p = probit(z_cav);
  const double root = std::sqrt(1.0 + cav_var);
  const double a = cav_mean / root;
  const double pa = probit(a);
  const double na = norm_pdf(a);
  m.z_norm = p * pa + (1.0 - p) * (1.0 - pa);
  if (m.z_norm <= 0.0) return m;
  const double k = cav_var * na / root + cav_mean * pa;
  m.first = (p * k + (1.0 - p) * (cav_mean - k)) / m.z_norm;
  const double j = (cav_mean * cav_mean + cav_var) * pa +
                   2.0 * cav_mean * cav_var * na / root -
                   cav_var * cav_var * a * na / (1.0 + cav_var);
  m.second = ((2.0 * p - 1.0) * j +
              (1.0 - p) * (cav_var + cav_mean * cav_mean)) /
             m.z_norm;
  m.e_omega = p * pa / m.z_norm;
  return m;
}

GaussianNat gp_coupling_message(const Eigen::VectorXd& cavity_mean,
                                const Eigen::MatrixXd& cavity_cov,
                                const Eigen::MatrixXd& coupling_cov) {
  if (cavity_cov.rows() != coupling_cov.rows() ||
      cavity_mean.size() != cavity_cov.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "gp_coupling_message: inconsistent dimensions");
  }
  Eigen::MatrixXd cov = cavity_cov + coupling_cov;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::numeric, "gp_coupling_message: covariance not factorizable");
  }
  GaussianNat out;
  out.precision =
      llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  out.precision = 0.5 * (out.precision + out.precision.transpose()).eval();
  out.shift = llt.solve(cavity_mean);
  return out;
}

Gaussian1 damp(const Gaussian1& next, const Gaussian1& prev, double eta) {
  return {eta * next.precision + (1.0 - eta) * prev.precision,
          eta * next.shift + (1.0 - eta) * prev.shift};
}

GaussianNat damp(const GaussianNat& next, const GaussianNat& prev, double eta) {
  return {eta * next.precision + (1.0 - eta) * prev.precision,
          eta * next.shift + (1.0 - eta) * prev.shift};
}

double damp_probit(double z_next, double z_prev, double eta) {
  return probit_from_logit(eta * logit_probit(z_next) +
                           (1.0 - eta) * logit_probit(z_prev));
}

EpState::EpState(const Dataset& d, const Hyperparams& h, EpOptions opts)
    : hp_(h), opts_(std::move(opts)) {
  d.validate();
  h.validate();
  n_ = d.n();
  t_ = d.t();
  eta_ = h.eta;
  if (opts_.mu_prior_first && opts_.mu_prior_first->dim() != n_) {
    fail(ErrorCode::dimension_mismatch, "mu prior dimension != N");
  }

  vague_jitter_ = 1.0 / (100.0 * (hp_.alpha_sigma + hp_.alpha_w));

  sigma0_ = hp_.spatial_kernel(n_);
  w_ = hp_.temporal_kernel(n_);

  if (!opts_.mu_prior_first && hp_.mu1_prior) {
    opts_.mu_prior_first =
        GaussianNat::from_moments(Eigen::VectorXd::Zero(n_), w_);
  }

  g_prec_ = (d.a.transpose() * d.a) / hp_.sigma2;
  g_prec_ = 0.5 * (g_prec_ + g_prec_.transpose()).eval();
  g_shift_ = d.a.transpose() * d.y / hp_.sigma2;

  f_prec_.setZero(n_, t_);
  f_shift_.setZero(n_, t_);
  z_f_.setZero(n_, t_);

  const int covs = hp_.shared_covariances ? 1 : t_;
  h_prec_.setZero(n_, covs);
  h_mean_.setZero(n_, t_);
  z_h_.setZero(n_, t_);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n_, n_);
  r_gamma_prec_.assign(covs, zero);
  r_mu_prec_.assign(covs, zero);
  r_gamma_mean_.setZero(n_, t_);
  r_mu_mean_.setZero(n_, t_);

  u_fwd_prec_.assign(covs, zero);
  u_bwd_prec_.assign(covs, zero);
  u_fwd_mean_.setZero(n_, t_);
  u_bwd_mean_.setZero(n_, t_);
}

GaussianNat EpState::x_marginal_nat(int t) const {
  GaussianNat g;
  g.precision = g_prec_;
  g.precision.diagonal() += f_prec_.col(t);
  g.shift = g_shift_.col(t) + f_shift_.col(t);
  return g;
}

GaussianNat EpState::gamma_marginal_nat(int t) const {
  const int ci = cov_idx(t);
  GaussianNat g;
  g.precision = r_gamma_prec_[ci];
  g.precision.diagonal() += h_prec_.col(ci);
  g.shift = r_gamma_prec_[ci] * r_gamma_mean_.col(t);
  g.shift.array() += h_prec_.col(ci).array() * h_mean_.col(t).array();
  return g;
}

GaussianNat EpState::mu_marginal_nat(int t) const {
  const int ci = cov_idx(t);
  GaussianNat g;
  g.precision = r_mu_prec_[ci];
  g.shift = r_mu_prec_[ci] * r_mu_mean_.col(t);
  if (t >= 1) {
    const int cu = cov_idx(t);
    g.precision += u_fwd_prec_[cu];
    g.shift += u_fwd_prec_[cu] * u_fwd_mean_.col(t);
  }
  if (t + 1 < t_) {
    const int cu = cov_idx(t + 1);
    g.precision += u_bwd_prec_[cu];
    g.shift += u_bwd_prec_[cu] * u_bwd_mean_.col(t + 1);
  }
  if (t == 0 && opts_.mu_prior_first) {
    g.precision += opts_.mu_prior_first->precision;
    g.shift += opts_.mu_prior_first->shift;
  }
  return g;
}

double EpState::omega_score(int i, int t) const {
  return bernoulli_product(z_f_(i, t), z_h_(i, t));
}

Moments EpState::moments_or_throw(const GaussianNat& nat, const char* what,
                                  int t) const {
  auto m = try_moments(nat.precision, nat.shift, vague_jitter_);
  if (!m) {
    fail(ErrorCode::numeric, std::string(what) +
                                 " marginal not invertible at t=" +
                                 std::to_string(t));
  }
  return *m;
}

void EpState::update_f(int t) {
  // Sequential site refinement: the marginal is refreshed by a rank-1 update
  // after every component so each decision sees the previous ones.
  Moments mm = moments_or_throw(x_marginal_nat(t), "x", t);
  Eigen::VectorXd shift = g_shift_.col(t) + f_shift_.col(t);
  for (int i = 0; i < n_; ++i) {
    const double marg_var = mm.cov(i, i);
    const double marg_mean = mm.mean(i);
    const Gaussian1 old_site = f_site(i, t);
    const Gaussian1 cav{1.0 / marg_var - old_site.precision,
                        marg_mean / marg_var - old_site.shift};
    if (!(cav.precision > 0.0) || !std::isfinite(cav.precision)) {
      ++stats_.skipped;
      continue;
    }
    const double z_cav = z_h_(i, t);
    const TiltedMoments mo =
        tilted_f_moments(cav.mean(), cav.variance(), z_cav, hp_.sigma2_x);
    if (mo.z_norm < kTiltedFloor) {
      ++stats_.skipped;
      continue;
    }
    const double vstar = mo.second - mo.first * mo.first;
    if (!(vstar > kVarFloor)) {
      ++stats_.skipped;
      continue;
    }
    Gaussian1 site =
        gaussian_quotient(Gaussian1::from_moments(mo.first, vstar), cav);
    if (site.precision <= 0.0) {
      // Replace the negative variance with the large value, keeping the
      // factor's mean finite.
      const double mean = site.precision < 0.0 ? site.mean() : 0.0;
      site.precision = 1.0 / hp_.neg_var_replacement;
      site.shift = mean * site.precision;
      ++stats_.negative_variances;
    }
    cap_site(site);
    const Gaussian1 damped = damp(site, old_site, eta_);
    const double z_new = bernoulli_quotient(probit_inv(mo.e_omega), z_cav);
    const double z_damped = damp_probit(z_new, z_f_(i, t), eta_);
    if (!std::isfinite(damped.precision) || !std::isfinite(damped.shift) ||
        !std::isfinite(z_damped)) {
      fail(ErrorCode::numeric, "non-finite f factor at i=" + std::to_string(i) +
                                   ", t=" + std::to_string(t));
    }
    f_prec_(i, t) = damped.precision;
    f_shift_(i, t) = damped.shift;
    z_f_(i, t) = z_damped;

    // Sherman-Morrison refresh of the marginal with the site delta.
    const double dprec = damped.precision - old_site.precision;
    const double dshift = damped.shift - old_site.shift;
    const double denom = 1.0 + dprec * mm.cov(i, i);
    mm.cov -= (dprec / denom) * (mm.cov.col(i) * mm.cov.col(i).transpose());
    shift(i) += dshift;
    mm.mean = mm.cov * shift;
    if (!mm.cov.allFinite() || !mm.mean.allFinite()) {
      fail(ErrorCode::numeric,
           "non-finite x marginal refresh at t=" + std::to_string(t));
    }
  }
}

void EpState::update_h(int t) {
  Moments mm = moments_or_throw(gamma_marginal_nat(t), "gamma", t);
  const int ci = cov_idx(t);
  Eigen::VectorXd shift = gamma_marginal_nat(t).shift;
  for (int i = 0; i < n_; ++i) {
    const double marg_var = mm.cov(i, i);
    const double marg_mean = mm.mean(i);
    const double site_prec = h_prec_(i, ci);
    const double site_shift = site_prec * h_mean_(i, t);
    const Gaussian1 cav{1.0 / marg_var - site_prec,
                        marg_mean / marg_var - site_shift};
    if (!(cav.precision > 0.0) || !std::isfinite(cav.precision)) {
      ++stats_.skipped;
      continue;
    }
    const double z_cav = z_f_(i, t);
    const TiltedMoments mo =
        tilted_h_moments(cav.mean(), cav.variance(), z_cav);
    if (mo.z_norm < kTiltedFloor) {
      ++stats_.skipped;
      continue;
    }
    const double sstar = mo.second - mo.first * mo.first;
    if (!(sstar > kVarFloor)) {
      ++stats_.skipped;
      continue;
    }
    Gaussian1 site =
        gaussian_quotient(Gaussian1::from_moments(mo.first, sstar), cav);
    if (site.precision <= 0.0) {
      const double mean = site.precision < 0.0 ? site.mean() : 0.0;
      site.precision = 1.0 / hp_.neg_var_replacement;
      site.shift = mean * site.precision;
      ++stats_.negative_variances;
    }
    cap_site(site);
    const Gaussian1 damped =
        damp(site, Gaussian1{site_prec, site_shift}, eta_);
    const double z_new = bernoulli_quotient(probit_inv(mo.e_omega), z_cav);
    const double z_damped = damp_probit(z_new, z_h_(i, t), eta_);
    if (!std::isfinite(damped.precision) || !std::isfinite(damped.shift) ||
        !std::isfinite(z_damped) || !(damped.precision > 0.0)) {
      fail(ErrorCode::numeric, "non-finite h factor at i=" + std::to_string(i) +
                                   ", t=" + std::to_string(t));
    }
    h_prec_(i, ci) = damped.precision;
    h_mean_(i, t) = damped.shift / damped.precision;
    z_h_(i, t) = z_damped;

    const double dprec = damped.precision - site_prec;
    const double dshift = damped.shift - site_shift;
    const double denom = 1.0 + dprec * mm.cov(i, i);
    mm.cov -= (dprec / denom) * (mm.cov.col(i) * mm.cov.col(i).transpose());
    shift(i) += dshift;
    mm.mean = mm.cov * shift;
    if (!mm.cov.allFinite() || !mm.mean.allFinite()) {
      fail(ErrorCode::numeric,
           "non-finite gamma marginal refresh at t=" + std::to_string(t));
    }
  }
}

void EpState::write_coupled_part(std::vector<Eigen::MatrixXd>& prec_store,
                                 Eigen::MatrixXd& mean_store, int ci, int t,
                                 const GaussianNat& msg, const char* what) {
  GaussianNat old{prec_store[ci],
                  prec_store[ci] * mean_store.col(t)};
  GaussianNat damped = damp(msg, old, eta_);
  Eigen::LLT<Eigen::MatrixXd> llt(damped.precision);
  if (llt.info() != Eigen::Success || !damped.precision.allFinite() ||
      !damped.shift.allFinite()) {
    fail(ErrorCode::numeric, std::string("non-finite ") + what +
                                 " factor at t=" + std::to_string(t));
  }
  Eigen::VectorXd mean = llt.solve(damped.shift);
  if (!mean.allFinite()) {
    fail(ErrorCode::numeric, std::string("non-finite ") + what +
                                 " factor mean at t=" + std::to_string(t));
  }
  prec_store[ci] = damped.precision;
  mean_store.col(t) = mean;
}

void EpState::update_r(int t) {
  const int ci = cov_idx(t);

  GaussianNat gm = gamma_marginal_nat(t);
  auto gamma_cav =
      try_moments(gm.precision - r_gamma_prec_[ci],
                  gm.shift - r_gamma_prec_[ci] * r_gamma_mean_.col(t),
                  vague_jitter_);
  GaussianNat mum = mu_marginal_nat(t);
  auto mu_cav = try_moments(mum.precision - r_mu_prec_[ci],
                            mum.shift - r_mu_prec_[ci] * r_mu_mean_.col(t),
                            vague_jitter_);

  if (mu_cav) {
    GaussianNat msg = gp_coupling_message(mu_cav->mean, mu_cav->cov, sigma0_);
    write_coupled_part(r_gamma_prec_, r_gamma_mean_, ci, t, msg, "r(gamma)");
  } else {
    ++stats_.skipped;
  }

  if (gamma_cav) {
    GaussianNat msg =
        gp_coupling_message(gamma_cav->mean, gamma_cav->cov, sigma0_);
    write_coupled_part(r_mu_prec_, r_mu_mean_, ci, t, msg, "r(mu)");
  } else {
    ++stats_.skipped;
  }
}

void EpState::update_u(int t) {
  if (t < 1) {
    fail(ErrorCode::invalid_argument, "update_u requires t >= 1");
  }
  const int ci = cov_idx(t);

  GaussianNat prev = mu_marginal_nat(t - 1);
  auto cav_prev =
      try_moments(prev.precision - u_bwd_prec_[ci],
                  prev.shift - u_bwd_prec_[ci] * u_bwd_mean_.col(t),
                  vague_jitter_);
  GaussianNat cur = mu_marginal_nat(t);
  auto cav_cur =
      try_moments(cur.precision - u_fwd_prec_[ci],
                  cur.shift - u_fwd_prec_[ci] * u_fwd_mean_.col(t),
                  vague_jitter_);

  if (cav_prev) {
    GaussianNat msg = gp_coupling_message(cav_prev->mean, cav_prev->cov, w_);
    write_coupled_part(u_fwd_prec_, u_fwd_mean_, ci, t, msg, "u(forward)");
  } else {
    ++stats_.skipped;
  }

  if (cav_cur) {
    GaussianNat msg = gp_coupling_message(cav_cur->mean, cav_cur->cov, w_);
    write_coupled_part(u_bwd_prec_, u_bwd_mean_, ci, t, msg, "u(backward)");
  } else {
    ++stats_.skipped;
  }
}

SweepStats EpState::sweep() {
  stats_ = SweepStats{};
  stats_.eta_used = eta_;
  for (int t = 0; t < t_; ++t) {
    update_f(t);
    update_h(t);
    update_r(t);
    if (t >= 1) update_u(t);
  }
  eta_ *= hp_.xi;
  return stats_;
}

Eigen::MatrixXd EpState::xhat() const {
  Eigen::MatrixXd x(n_, t_);
  for (int t = 0; t < t_; ++t) {
    Moments mm = moments_or_throw(x_marginal_nat(t), "x", t);
    x.col(t) = mm.mean;
  }
  return x;
}

PosteriorSummary EpState::make_summary() const {
  PosteriorSummary s;
  s.xhat.resize(n_, t_);
  s.x_var.resize(n_, t_);
  s.spike_prob.resize(n_, t_);
  s.gamma_mean.resize(n_, t_);
  s.mu_mean.resize(n_, t_);
  for (int t = 0; t < t_; ++t) {
    Moments mx = moments_or_throw(x_marginal_nat(t), "x", t);
    s.xhat.col(t) = mx.mean;
    s.x_var.col(t) = mx.cov.diagonal();
    Moments mg = moments_or_throw(gamma_marginal_nat(t), "gamma", t);
    s.gamma_mean.col(t) = mg.mean;
    Moments mu = moments_or_throw(mu_marginal_nat(t), "mu", t);
    s.mu_mean.col(t) = mu.mean;
    for (int i = 0; i < n_; ++i) {
      // At a fixed point the marginal moments equal the tilted moments, so
      // the tilted expectation is the same spike probability wherever the
      // probit clamp is not saturated; where both scores sit at the clamp
      // (certain data against a certain structure prior) the tilted form
      // still resolves the likelihood-ratio hierarchy.
      const Gaussian1 cav{1.0 / mx.cov(i, i) - f_prec_(i, t),
                          mx.mean(i) / mx.cov(i, i) - f_shift_(i, t)};
      double p = probit(omega_score(i, t));
      if (cav.precision > 0.0 && std::isfinite(cav.precision)) {
        const TiltedMoments mo = tilted_f_moments(cav.mean(), cav.variance(),
                                                  z_h_(i, t), hp_.sigma2_x);
        if (mo.z_norm >= kTiltedFloor) p = mo.e_omega;
      }
      s.spike_prob(i, t) = p;
    }
  }
  return s;
}

OfflineResult run_offline(const Dataset& d, const Hyperparams& h,
                          EpOptions opts) {
  const auto start = std::chrono::steady_clock::now();
  EpState state(d, h, std::move(opts));

  OfflineResult out;
  Eigen::MatrixXd x_old = state.xhat();
  int iters = 0;
  for (; iters < h.max_iters; ++iters) {
    SweepStats stats = state.sweep();
    Eigen::MatrixXd x_new = state.xhat();
    const double denom = x_old.cwiseAbs().maxCoeff();
    const double delta = (x_new - x_old).cwiseAbs().maxCoeff();
    double change;
    if (denom > 0.0) {
      change = delta / denom;
    } else {
      change = delta > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    out.diagnostics.sweeps.push_back(
        {change, stats.eta_used, stats.negative_variances, stats.skipped});
    x_old = std::move(x_new);
    if (change < h.tolerance) {
      out.diagnostics.converged = true;
      ++iters;
      break;
    }
  }
  out.diagnostics.iterations = iters;
  out.posterior = state.make_summary();
  out.mu_last = state.mu_marginal_nat(state.t_len() - 1);
  out.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

}  // namespace tlgp
