#include "stream.hpp"

#include "errors.hpp"
#include "kernels.hpp"

namespace tlgp {

namespace {

Moments moments_or_throw(const GaussianNat& nat, const char* what) {
  auto m = try_moments(nat.precision, nat.shift);
  if (!m) {
    fail(ErrorCode::numeric,
         std::string(what) + ": mu posterior precision not invertible");
  }
  return *m;
}

}  // namespace

StreamState::StreamState(const Dataset& prefix, const Hyperparams& h)
    : hp_(h), a_(prefix.a) {
  prefix.validate();
  if (prefix.t() < 1) {
    fail(ErrorCode::invalid_argument, "stream prefix must have T_init >= 1");
  }
  w_ = hp_.temporal_kernel(prefix.n());

  OfflineResult res = run_offline(prefix, hp_);
  init_diag_ = res.diagnostics;
  Moments m = moments_or_throw(res.mu_last, "init_stream");
  e_ = m.mean;
  d_ = m.cov;

  xhat_ = res.posterior.xhat;
  spike_prob_ = res.posterior.spike_prob;
  gamma_mean_ = res.posterior.gamma_mean;
  mu_mean_ = res.posterior.mu_mean;
  t_ = prefix.t();
}

Moments StreamState::predict() const {
  Moments m;
  m.mean = e_;
  m.cov = w_ + d_;
  return m;
}

void StreamState::update(const Eigen::MatrixXd& y_block) {
  if (y_block.cols() < 1) {
    fail(ErrorCode::invalid_argument, "stream update needs M >= 1 columns");
  }
  if (y_block.rows() != a_.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "stream update: observation rows != K at timestamp " +
             std::to_string(t_ + 1));
  }

  Moments pred = predict();
  EpOptions opts;
  opts.mu_prior_first =
      GaussianNat::from_moments(pred.mean, ensure_psd(pred.cov, 0.0));

  Dataset block;
  block.a = a_;
  block.y = y_block;

  OfflineResult res;
  try {
    res = run_offline(block, hp_, opts);
  } catch (const Error& e) {
    fail(e.code(), "stream update at timestamp " + std::to_string(t_ + 1) +
                       ": " + e.what());
  }
  absorb(res);
}

void StreamState::step(const Eigen::VectorXd& y_col) { update(y_col); }

void StreamState::absorb(const OfflineResult& res) {
  const int m = static_cast<int>(res.posterior.xhat.cols());
  auto append = [&](Eigen::MatrixXd& dst, const Eigen::MatrixXd& src) {
    dst.conservativeResize(src.rows(), t_ + m);
    dst.rightCols(m) = src;
  };
  append(xhat_, res.posterior.xhat);
  append(spike_prob_, res.posterior.spike_prob);
  append(gamma_mean_, res.posterior.gamma_mean);
  append(mu_mean_, res.posterior.mu_mean);

  Moments mm = moments_or_throw(res.mu_last, "stream update");
  e_ = mm.mean;
  d_ = mm.cov;
  t_ += m;
  block_diags_.push_back(res.diagnostics);
}

}  // namespace tlgp
