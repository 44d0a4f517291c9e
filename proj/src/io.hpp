#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "admm.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace tlgp {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Matrix text format: first line "rows cols", then one row per line of
// space-separated decimals (shortest round-trip representation on write).
// ---------------------------------------------------------------------------

Eigen::MatrixXd load_matrix(const std::string& path);
void save_matrix(const Eigen::MatrixXd& m, const std::string& path);

/// Streaming observation format: one timestamp vector per line.
std::vector<Eigen::VectorXd> load_timestamp_records(const std::string& path);

/// Shortest decimal representation that round-trips through double.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Run configuration: flat "key = value" lines, '#' comments, unknown keys
// rejected. Defaults are the synthetic-benchmark profile.
// ---------------------------------------------------------------------------

enum class RunMode { generate, recover, stream, eval, bench };

enum class GeneratorKind { groups, model };

struct RunConfig {
  RunMode mode = RunMode::recover;
  Hyperparams hp;
  GroupConfig group;
  GeneratorKind generator = GeneratorKind::groups;

  int n = 100, t = 50, k = 30;
  std::uint64_t seed = 0;
  double obs_noise = 0.0;  // variance of the noise added when generating Y

  int t_init = 10;
  int block = 1;

  AdmmConfig admm;
  bool admm_auto_lambda = true;  // grid-select lambda when true
  double support_threshold = 1e-3;

  std::string a_path, y_path, x_path, omega_path;
  std::string estimate_path, prob_path;
  std::string locations_path;
  std::string out_dir = "out";

  std::vector<double> ratios = {0.10, 0.15, 0.20, 0.25, 0.30,
                                0.35, 0.40, 0.45, 0.50, 0.55};
  int bench_seeds = 10;
  std::vector<std::string> bench_methods = {"ep", "ep_online", "admm"};

  void validate() const;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

/// Full snapshot of every key; parsing the output reproduces the config
/// exactly, which is what makes manifests re-runnable.
std::string config_to_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

const char* run_mode_name(RunMode mode);

// ---------------------------------------------------------------------------
// Result records: one JSON object per line; concatenation of result files is
// itself a valid result file.
// ---------------------------------------------------------------------------

struct ResultRecord {
  std::string method;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  ScoreReport score;
  int iterations = 0;
  double wall_seconds = 0.0;
};

std::string result_record_json(const ResultRecord& r);
std::string score_json(const ScoreReport& s);

}  // namespace tlgp
