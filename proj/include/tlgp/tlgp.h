/*
 * tlgp - hierarchical spike-and-slab sparse regression with a two-level
 * Gaussian-process prior, inferred by expectation propagation.
 *
 * C API over the C++ core: opaque handles, status codes, thread-local error
 * messages. Every function returning tlgp_status sets the last-error message
 * on failure; handles created by the library are released with the matching
 * *_free function.
 */

#ifndef TLGP_H
#define TLGP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tlgp_status {
  TLGP_OK = 0,
  TLGP_ERROR_INVALID_ARGUMENT = 1,
  TLGP_ERROR_DIMENSION = 2,
  TLGP_ERROR_PARSE = 3,
  TLGP_ERROR_IO = 4,
  TLGP_ERROR_NUMERIC = 5,
  TLGP_ERROR_INTERNAL = 6
} tlgp_status;

const char* tlgp_status_name(tlgp_status status);

/* Message describing the most recent failure on this thread. */
const char* tlgp_last_error(void);

const char* tlgp_version(void);

/* ------------------------------------------------------------------ */
/* Dense matrices (row-major storage behind the accessors).           */
/* ------------------------------------------------------------------ */

typedef struct tlgp_matrix_s tlgp_matrix;

/* data may be NULL for a zero matrix; otherwise row-major rows*cols. */
tlgp_status tlgp_matrix_create(int64_t rows, int64_t cols, const double* data,
                               tlgp_matrix** out);
tlgp_status tlgp_matrix_load(const char* path, tlgp_matrix** out);
tlgp_status tlgp_matrix_save(const tlgp_matrix* m, const char* path);
int64_t tlgp_matrix_rows(const tlgp_matrix* m);
int64_t tlgp_matrix_cols(const tlgp_matrix* m);
double tlgp_matrix_get(const tlgp_matrix* m, int64_t row, int64_t col);
/* Copies the full matrix into buf (row-major); buf_len must be rows*cols. */
tlgp_status tlgp_matrix_copy_out(const tlgp_matrix* m, double* buf,
                                 size_t buf_len);
void tlgp_matrix_free(tlgp_matrix* m);

/* ------------------------------------------------------------------ */
/* Run configuration ("key = value" config files; see README).        */
/* ------------------------------------------------------------------ */

typedef struct tlgp_config_s tlgp_config;

/* Defaults: the synthetic-benchmark hyperparameter profile. */
tlgp_status tlgp_config_create(tlgp_config** out);
tlgp_status tlgp_config_load(const char* path, tlgp_config** out);
tlgp_status tlgp_config_set(tlgp_config* cfg, const char* key,
                            const char* value);
tlgp_status tlgp_config_get(const tlgp_config* cfg, const char* key, char* buf,
                            size_t buf_len);
/* Full manifest snapshot; loading it reproduces the configuration. */
tlgp_status tlgp_config_save(const tlgp_config* cfg, const char* path);
void tlgp_config_free(tlgp_config* cfg);

/* ------------------------------------------------------------------ */
/* Synthetic data generation.                                         */
/* ------------------------------------------------------------------ */

/* Generates A (k x n), Y (k x t), X truth and Omega truth (n x t) from the
 * configured generator and seed. Any output pointer may be NULL. */
tlgp_status tlgp_generate(const tlgp_config* cfg, tlgp_matrix** a,
                          tlgp_matrix** y, tlgp_matrix** x_true,
                          tlgp_matrix** omega_true);

/* ------------------------------------------------------------------ */
/* Inference results.                                                 */
/* ------------------------------------------------------------------ */

typedef struct tlgp_result_s tlgp_result;

tlgp_status tlgp_result_signal(const tlgp_result* r, tlgp_matrix** xhat);
/* Posterior spike probabilities; TLGP_ERROR_INVALID_ARGUMENT for results of
 * methods that do not produce them (the lasso baseline). */
tlgp_status tlgp_result_spike_prob(const tlgp_result* r, tlgp_matrix** prob);
int tlgp_result_iterations(const tlgp_result* r);
int tlgp_result_converged(const tlgp_result* r);
double tlgp_result_wall_seconds(const tlgp_result* r);
/* Per-sweep relative change trace (EP results; empty for the baseline). */
size_t tlgp_result_trace_len(const tlgp_result* r);
tlgp_status tlgp_result_trace(const tlgp_result* r, double* buf,
                              size_t buf_len);
void tlgp_result_free(tlgp_result* r);

/* Offline EP recovery of X from A (k x n) and Y (k x t). */
tlgp_status tlgp_recover(const tlgp_config* cfg, const tlgp_matrix* a,
                         const tlgp_matrix* y, tlgp_result** out);

/* ADMM lasso baseline (column-by-column over Y). */
tlgp_status tlgp_lasso(const tlgp_config* cfg, const tlgp_matrix* a,
                       const tlgp_matrix* y, tlgp_result** out);

/* Grid-selects the lasso weight on held-out data: 5 log-spaced multiples of
 * ||A^T y||_inf scored by F-measure against x_true. */
tlgp_status tlgp_lasso_select_lambda(const tlgp_config* cfg,
                                     const tlgp_matrix* a,
                                     const tlgp_matrix* y,
                                     const tlgp_matrix* x_true, double* out);

/* ------------------------------------------------------------------ */
/* Online inference (Bayesian filtering).                             */
/* ------------------------------------------------------------------ */

typedef struct tlgp_stream_s tlgp_stream;

/* Warm start: offline EP on y_prefix (k x T_init). */
tlgp_status tlgp_stream_init(const tlgp_config* cfg, const tlgp_matrix* a,
                             const tlgp_matrix* y_prefix, tlgp_stream** out);
/* Predict + update on a block of new observation columns (k x M). */
tlgp_status tlgp_stream_update(tlgp_stream* s, const tlgp_matrix* y_block);
int64_t tlgp_stream_timestamp(const tlgp_stream* s);
/* Snapshot of the accumulated posterior (prefix + processed blocks). */
tlgp_status tlgp_stream_result(const tlgp_stream* s, tlgp_result** out);
void tlgp_stream_free(tlgp_stream* s);

/* ------------------------------------------------------------------ */
/* Scoring.                                                           */
/* ------------------------------------------------------------------ */

typedef struct tlgp_score {
  double nmse;
  double f_measure;
  double precision;
  double recall;
  int64_t true_support;
  int64_t est_support;
  int64_t intersection;
} tlgp_score;

/* Scores x_est against x_true. The estimated support comes from spike_prob
 * (posterior rule, entries < 0.5 are non-zero) when given, otherwise from
 * |x_est| > magnitude_rel_threshold * max|x_est|. The true support comes from
 * omega_true (0 entries are non-zero) when given, otherwise from x_true. */
tlgp_status tlgp_evaluate(const tlgp_matrix* x_true,
                          const tlgp_matrix* omega_true,
                          const tlgp_matrix* x_est,
                          const tlgp_matrix* spike_prob,
                          double magnitude_rel_threshold, tlgp_score* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TLGP_H */
