#include "tlgp/tlgp.h"

#include <cstring>
#include <sstream>
#include <string>

#include "admm.hpp"
#include "ep.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "stream.hpp"

using tlgp::Error;
using tlgp::ErrorCode;

struct tlgp_matrix_s {
  Eigen::MatrixXd m;
};

struct tlgp_config_s {
  tlgp::RunConfig cfg;
};

struct tlgp_result_s {
  Eigen::MatrixXd xhat;
  Eigen::MatrixXd spike_prob;  // empty for the baseline
  bool has_spike_prob = false;
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::vector<double> trace;
};

struct tlgp_stream_s {
  tlgp::StreamState state;
  double wall_seconds = 0.0;
};

namespace {

thread_local std::string g_last_error;

tlgp_status status_from_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return TLGP_ERROR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return TLGP_ERROR_DIMENSION;
    case ErrorCode::parse: return TLGP_ERROR_PARSE;
    case ErrorCode::io: return TLGP_ERROR_IO;
    case ErrorCode::numeric: return TLGP_ERROR_NUMERIC;
  }
  return TLGP_ERROR_INTERNAL;
}

tlgp_status set_error(tlgp_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

/// Runs fn, translating exceptions into status codes.
template <typename Fn>
tlgp_status guarded(Fn&& fn) {
  try {
    fn();
    return TLGP_OK;
  } catch (const Error& e) {
    return set_error(status_from_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return set_error(TLGP_ERROR_INTERNAL, e.what());
  } catch (...) {
    return set_error(TLGP_ERROR_INTERNAL, "unknown error");
  }
}

tlgp_status require(bool cond, const char* what) {
  if (cond) return TLGP_OK;
  return set_error(TLGP_ERROR_INVALID_ARGUMENT, what);
}

tlgp_result* make_result(const tlgp::OfflineResult& res) {
  auto* r = new tlgp_result_s;
  r->xhat = res.posterior.xhat;
  r->spike_prob = res.posterior.spike_prob;
  r->has_spike_prob = true;
  r->iterations = res.diagnostics.iterations;
  r->converged = res.diagnostics.converged;
  r->wall_seconds = res.diagnostics.wall_seconds;
  for (const auto& s : res.diagnostics.sweeps) r->trace.push_back(s.change);
  return r;
}

}  // namespace

extern "C" {

const char* tlgp_status_name(tlgp_status status) {
  switch (status) {
    case TLGP_OK: return "ok";
    case TLGP_ERROR_INVALID_ARGUMENT: return "invalid_argument";
    case TLGP_ERROR_DIMENSION: return "dimension_mismatch";
    case TLGP_ERROR_PARSE: return "parse_error";
    case TLGP_ERROR_IO: return "io_error";
    case TLGP_ERROR_NUMERIC: return "numeric_error";
    case TLGP_ERROR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* tlgp_last_error(void) { return g_last_error.c_str(); }

const char* tlgp_version(void) { return tlgp::kVersion; }

tlgp_status tlgp_matrix_create(int64_t rows, int64_t cols, const double* data,
                               tlgp_matrix** out) {
  if (auto s = require(out && rows > 0 && cols > 0,
                       "matrix_create: bad arguments"))
    return s;
  return guarded([&] {
    auto* m = new tlgp_matrix_s;
    if (data) {
      m->m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                            Eigen::Dynamic, Eigen::RowMajor>>(
          data, rows, cols);
    } else {
      m->m = Eigen::MatrixXd::Zero(rows, cols);
    }
    *out = m;
  });
}

tlgp_status tlgp_matrix_load(const char* path, tlgp_matrix** out) {
  if (auto s = require(path && out, "matrix_load: bad arguments")) return s;
  return guarded([&] { *out = new tlgp_matrix_s{tlgp::load_matrix(path)}; });
}

tlgp_status tlgp_matrix_save(const tlgp_matrix* m, const char* path) {
  if (auto s = require(m && path, "matrix_save: bad arguments")) return s;
  return guarded([&] { tlgp::save_matrix(m->m, path); });
}

int64_t tlgp_matrix_rows(const tlgp_matrix* m) { return m ? m->m.rows() : 0; }
int64_t tlgp_matrix_cols(const tlgp_matrix* m) { return m ? m->m.cols() : 0; }

double tlgp_matrix_get(const tlgp_matrix* m, int64_t row, int64_t col) {
  return m->m(row, col);
}

tlgp_status tlgp_matrix_copy_out(const tlgp_matrix* m, double* buf,
                                 size_t buf_len) {
  if (auto s = require(m && buf, "matrix_copy_out: bad arguments")) return s;
  if (buf_len != static_cast<size_t>(m->m.size())) {
    return set_error(TLGP_ERROR_DIMENSION, "matrix_copy_out: buffer size");
  }
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>(buf, m->m.rows(), m->m.cols()) =
      m->m;
  return TLGP_OK;
}

void tlgp_matrix_free(tlgp_matrix* m) { delete m; }

tlgp_status tlgp_config_create(tlgp_config** out) {
  if (auto s = require(out != nullptr, "config_create: out is null")) return s;
  return guarded([&] { *out = new tlgp_config_s{}; });
}

tlgp_status tlgp_config_load(const char* path, tlgp_config** out) {
  if (auto s = require(path && out, "config_load: bad arguments")) return s;
  return guarded(
      [&] { *out = new tlgp_config_s{tlgp::parse_config(path)}; });
}

tlgp_status tlgp_config_set(tlgp_config* cfg, const char* key,
                            const char* value) {
  if (auto s = require(cfg && key && value, "config_set: bad arguments"))
    return s;
  return guarded([&] {
    // Reuse the file parser so range/type checks stay in one place.
    std::string text = tlgp::config_to_text(cfg->cfg);
    text += std::string(key) + " = " + value + "\n";
    cfg->cfg = tlgp::parse_config_text(text, "config_set");
  });
}

tlgp_status tlgp_config_get(const tlgp_config* cfg, const char* key, char* buf,
                            size_t buf_len) {
  if (auto s = require(cfg && key && buf && buf_len > 0,
                       "config_get: bad arguments"))
    return s;
  return guarded([&] {
    std::string text = tlgp::config_to_text(cfg->cfg);
    std::istringstream in(text);
    std::string line;
    const std::string prefix = std::string(key) + " = ";
    while (std::getline(in, line)) {
      if (line.rfind(prefix, 0) == 0) {
        std::string value = line.substr(prefix.size());
        if (value.size() + 1 > buf_len) {
          tlgp::fail(ErrorCode::invalid_argument, "config_get: buffer too small");
        }
        std::memcpy(buf, value.c_str(), value.size() + 1);
        return;
      }
    }
    tlgp::fail(ErrorCode::parse, "config_get: unknown key \"" +
                                     std::string(key) + "\"");
  });
}

tlgp_status tlgp_config_save(const tlgp_config* cfg, const char* path) {
  if (auto s = require(cfg && path, "config_save: bad arguments")) return s;
  return guarded([&] { tlgp::save_config(cfg->cfg, path); });
}

void tlgp_config_free(tlgp_config* cfg) { delete cfg; }

tlgp_status tlgp_generate(const tlgp_config* cfg, tlgp_matrix** a,
                          tlgp_matrix** y, tlgp_matrix** x_true,
                          tlgp_matrix** omega_true) {
  if (auto s = require(cfg != nullptr, "generate: cfg is null")) return s;
  return guarded([&] {
    const tlgp::RunConfig& c = cfg->cfg;
    Eigen::MatrixXd am, ym, xm, om;
    if (c.generator == tlgp::GeneratorKind::model) {
      auto [d, truth] = tlgp::sample_generative(c.hp, c.n, c.t, c.k, c.seed);
      am = d.a;
      ym = d.y;
      xm = truth.x;
      om = truth.omega;
    } else {
      auto [xg, og] =
          tlgp::generate_structured_groups(c.n, c.t, c.seed, c.group);
      xm = xg;
      om = og;
      am = tlgp::make_design_matrix(c.k, c.n, tlgp::derive_seed(c.seed, 100));
      ym = tlgp::observe(am, xm, c.obs_noise, tlgp::derive_seed(c.seed, 101));
    }
    if (a) *a = new tlgp_matrix_s{std::move(am)};
    if (y) *y = new tlgp_matrix_s{std::move(ym)};
    if (x_true) *x_true = new tlgp_matrix_s{std::move(xm)};
    if (omega_true) *omega_true = new tlgp_matrix_s{std::move(om)};
  });
}

tlgp_status tlgp_recover(const tlgp_config* cfg, const tlgp_matrix* a,
                         const tlgp_matrix* y, tlgp_result** out) {
  if (auto s = require(cfg && a && y && out, "recover: bad arguments"))
    return s;
  return guarded([&] {
    tlgp::Dataset d;
    d.a = a->m;
    d.y = y->m;
    *out = make_result(tlgp::run_offline(d, cfg->cfg.hp));
  });
}

tlgp_status tlgp_lasso(const tlgp_config* cfg, const tlgp_matrix* a,
                       const tlgp_matrix* y, tlgp_result** out) {
  if (auto s = require(cfg && a && y && out, "lasso: bad arguments")) return s;
  return guarded([&] {
    tlgp::AdmmResult res = tlgp::lasso_admm(a->m, y->m, cfg->cfg.admm);
    auto* r = new tlgp_result_s;
    r->xhat = res.x;
    r->iterations = res.iterations;
    r->converged = res.converged;
    *out = r;
  });
}

tlgp_status tlgp_lasso_select_lambda(const tlgp_config* cfg,
                                     const tlgp_matrix* a,
                                     const tlgp_matrix* y,
                                     const tlgp_matrix* x_true, double* out) {
  if (auto s = require(cfg && a && y && x_true && out,
                       "lasso_select_lambda: bad arguments"))
    return s;
  return guarded([&] {
    *out = tlgp::select_lambda(a->m, y->m, x_true->m, cfg->cfg.admm,
                               {0.3, 0.1, 0.03, 0.01, 0.003},
                               cfg->cfg.support_threshold);
  });
}

tlgp_status tlgp_result_signal(const tlgp_result* r, tlgp_matrix** xhat) {
  if (auto s = require(r && xhat, "result_signal: bad arguments")) return s;
  return guarded([&] { *xhat = new tlgp_matrix_s{r->xhat}; });
}

tlgp_status tlgp_result_spike_prob(const tlgp_result* r, tlgp_matrix** prob) {
  if (auto s = require(r && prob, "result_spike_prob: bad arguments")) return s;
  if (!r->has_spike_prob) {
    return set_error(TLGP_ERROR_INVALID_ARGUMENT,
                     "result has no spike probabilities");
  }
  return guarded([&] { *prob = new tlgp_matrix_s{r->spike_prob}; });
}

int tlgp_result_iterations(const tlgp_result* r) {
  return r ? r->iterations : 0;
}

int tlgp_result_converged(const tlgp_result* r) {
  return r && r->converged ? 1 : 0;
}

double tlgp_result_wall_seconds(const tlgp_result* r) {
  return r ? r->wall_seconds : 0.0;
}

size_t tlgp_result_trace_len(const tlgp_result* r) {
  return r ? r->trace.size() : 0;
}

tlgp_status tlgp_result_trace(const tlgp_result* r, double* buf,
                              size_t buf_len) {
  if (auto s = require(r && buf, "result_trace: bad arguments")) return s;
  if (buf_len < r->trace.size()) {
    return set_error(TLGP_ERROR_DIMENSION, "result_trace: buffer too small");
  }
  std::memcpy(buf, r->trace.data(), r->trace.size() * sizeof(double));
  return TLGP_OK;
}

void tlgp_result_free(tlgp_result* r) { delete r; }

tlgp_status tlgp_stream_init(const tlgp_config* cfg, const tlgp_matrix* a,
                             const tlgp_matrix* y_prefix, tlgp_stream** out) {
  if (auto s = require(cfg && a && y_prefix && out, "stream_init: bad arguments"))
    return s;
  return guarded([&] {
    tlgp::Dataset prefix;
    prefix.a = a->m;
    prefix.y = y_prefix->m;
    auto* s = new tlgp_stream_s{tlgp::StreamState(prefix, cfg->cfg.hp)};
    s->wall_seconds = s->state.init_diagnostics().wall_seconds;
    *out = s;
  });
}

tlgp_status tlgp_stream_update(tlgp_stream* s, const tlgp_matrix* y_block) {
  if (auto st = require(s && y_block, "stream_update: bad arguments")) return st;
  return guarded([&] {
    s->state.update(y_block->m);
    s->wall_seconds += s->state.block_diagnostics().back().wall_seconds;
  });
}

int64_t tlgp_stream_timestamp(const tlgp_stream* s) {
  return s ? s->state.timestamp() : 0;
}

tlgp_status tlgp_stream_result(const tlgp_stream* s, tlgp_result** out) {
  if (auto st = require(s && out, "stream_result: bad arguments")) return st;
  return guarded([&] {
    auto* r = new tlgp_result_s;
    r->xhat = s->state.xhat();
    r->spike_prob = s->state.spike_prob();
    r->has_spike_prob = true;
    r->wall_seconds = s->wall_seconds;
    int iters = s->state.init_diagnostics().iterations;
    bool conv = s->state.init_diagnostics().converged;
    for (const auto& d : s->state.block_diagnostics()) {
      iters += d.iterations;
      conv = conv && d.converged;
    }
    r->iterations = iters;
    r->converged = conv;
    *out = r;
  });
}

void tlgp_stream_free(tlgp_stream* s) { delete s; }

tlgp_status tlgp_evaluate(const tlgp_matrix* x_true,
                          const tlgp_matrix* omega_true,
                          const tlgp_matrix* x_est,
                          const tlgp_matrix* spike_prob,
                          double magnitude_rel_threshold, tlgp_score* out) {
  if (auto s = require(x_true && x_est && out, "evaluate: bad arguments"))
    return s;
  return guarded([&] {
    Eigen::MatrixXi truth = omega_true
                                ? tlgp::support_from_omega(omega_true->m)
                                : tlgp::support_from_values(x_true->m);
    Eigen::MatrixXi est =
        spike_prob
            ? tlgp::support_from_posterior(spike_prob->m)
            : tlgp::support_from_magnitude(x_est->m, magnitude_rel_threshold);
    tlgp::ScoreReport rep = tlgp::score(x_true->m, x_est->m, truth, est);
    out->nmse = rep.nmse;
    out->f_measure = rep.f_measure;
    out->precision = rep.precision;
    out->recall = rep.recall;
    out->true_support = rep.true_support;
    out->est_support = rep.est_support;
    out->intersection = rep.intersection;
  });
}

}  // extern "C"
