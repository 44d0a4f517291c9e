// tlgp command-line interface. Everything heavy goes through the C API in
// tlgp/tlgp.h; this file only does argument handling, file layout, and the
// benchmark sweep loop.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tlgp/tlgp.h"

namespace {

namespace fs = std::filesystem;

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& msg) {
  throw CliError{code, msg};
}

void check(tlgp_status s, const std::string& what) {
  if (s != TLGP_OK) {
    die(2, what + ": " + tlgp_status_name(s) + ": " + tlgp_last_error());
  }
}

using MatrixPtr = std::unique_ptr<tlgp_matrix, decltype(&tlgp_matrix_free)>;
using ConfigPtr = std::unique_ptr<tlgp_config, decltype(&tlgp_config_free)>;
using ResultPtr = std::unique_ptr<tlgp_result, decltype(&tlgp_result_free)>;
using StreamPtr = std::unique_ptr<tlgp_stream, decltype(&tlgp_stream_free)>;

MatrixPtr wrap(tlgp_matrix* m) { return MatrixPtr(m, &tlgp_matrix_free); }
ResultPtr wrap(tlgp_result* r) { return ResultPtr(r, &tlgp_result_free); }

MatrixPtr load_matrix(const std::string& path) {
  tlgp_matrix* m = nullptr;
  check(tlgp_matrix_load(path.c_str(), &m), "loading " + path);
  return wrap(m);
}

void save_matrix(const tlgp_matrix* m, const fs::path& path) {
  check(tlgp_matrix_save(m, path.string().c_str()),
        "writing " + path.string());
}

MatrixPtr columns(const tlgp_matrix* m, int64_t first, int64_t count) {
  const int64_t rows = tlgp_matrix_rows(m);
  std::vector<double> buf(rows * count);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < count; ++c) {
      buf[r * count + c] = tlgp_matrix_get(m, r, first + c);
    }
  }
  tlgp_matrix* out = nullptr;
  check(tlgp_matrix_create(rows, count, buf.data(), &out), "slicing matrix");
  return wrap(out);
}

std::string cfg_get(const tlgp_config* cfg, const std::string& key) {
  char buf[4096];
  check(tlgp_config_get(cfg, key.c_str(), buf, sizeof(buf)), "reading config");
  return buf;
}

void cfg_set(tlgp_config* cfg, const std::string& key, const std::string& v) {
  tlgp_status s = tlgp_config_set(cfg, key.c_str(), v.c_str());
  if (s != TLGP_OK) {
    // Bad values on the command line are usage errors.
    die(1, "config " + key + " = " + v + ": " + tlgp_last_error());
  }
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value pairs
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path,
                  "Configuration file (key = value lines)");
  cmd->add_option("-o,--out", opts.out_dir, "Output directory");
  cmd->add_option("-s,--set", opts.overrides,
                  "Override a config key, e.g. --set seed=3");
}

ConfigPtr make_config(const CommonOpts& opts, const std::string& mode) {
  tlgp_config* cfg = nullptr;
  if (!opts.config_path.empty()) {
    check(tlgp_config_load(opts.config_path.c_str(), &cfg),
          "loading " + opts.config_path);
  } else {
    check(tlgp_config_create(&cfg), "creating config");
  }
  ConfigPtr out(cfg, &tlgp_config_free);
  cfg_set(cfg, "mode", mode);
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      die(1, "--set expects key=value, got \"" + kv + "\"");
    }
    cfg_set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.out_dir.empty()) cfg_set(cfg, "out_dir", opts.out_dir);
  return out;
}

fs::path prepare_out_dir(const tlgp_config* cfg) {
  fs::path dir = cfg_get(cfg, "out_dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) die(2, "cannot create output directory " + dir.string());
  return dir;
}

void write_manifest(const tlgp_config* cfg, const fs::path& dir) {
  check(tlgp_config_save(cfg, (dir / "manifest.cfg").string().c_str()),
        "writing manifest");
}

nlohmann::json score_to_json(const tlgp_score& s) {
  return {{"nmse", s.nmse},
          {"f_measure", s.f_measure},
          {"precision", s.precision},
          {"recall", s.recall},
          {"true_support", s.true_support},
          {"est_support", s.est_support},
          {"intersection", s.intersection}};
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) die(2, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json result_diag_json(const tlgp_result* r) {
  std::vector<double> trace(tlgp_result_trace_len(r));
  if (!trace.empty()) {
    check(tlgp_result_trace(r, trace.data(), trace.size()), "reading trace");
  }
  return {{"iterations", tlgp_result_iterations(r)},
          {"converged", tlgp_result_converged(r) != 0},
          {"wall_seconds", tlgp_result_wall_seconds(r)},
          {"change_trace", trace}};
}

std::optional<tlgp_score> maybe_score(const tlgp_config* cfg,
                                      const tlgp_matrix* x_true,
                                      const tlgp_matrix* omega_true,
                                      const tlgp_matrix* x_est,
                                      const tlgp_matrix* prob) {
  if (!x_true) return std::nullopt;
  tlgp_score s{};
  double thr = std::stod(cfg_get(cfg, "support_threshold"));
  check(tlgp_evaluate(x_true, omega_true, x_est, prob, thr, &s), "scoring");
  return s;
}

MatrixPtr load_optional(const tlgp_config* cfg, const std::string& key) {
  std::string path = cfg_get(cfg, key);
  if (path.empty()) return MatrixPtr(nullptr, &tlgp_matrix_free);
  return load_matrix(path);
}

// ----------------------------------------------------------------- generate

int run_generate(const CommonOpts& opts) {
  ConfigPtr cfg = make_config(opts, "generate");
  fs::path dir = prepare_out_dir(cfg.get());

  tlgp_matrix *a = nullptr, *y = nullptr, *x = nullptr, *om = nullptr;
  check(tlgp_generate(cfg.get(), &a, &y, &x, &om), "generate");
  MatrixPtr ap = wrap(a), yp = wrap(y), xp = wrap(x), omp = wrap(om);

  save_matrix(ap.get(), dir / "a.txt");
  save_matrix(yp.get(), dir / "y.txt");
  save_matrix(xp.get(), dir / "x_true.txt");
  save_matrix(omp.get(), dir / "omega_true.txt");
  write_manifest(cfg.get(), dir);
  std::cout << "generated " << tlgp_matrix_rows(ap.get()) << "x"
            << tlgp_matrix_cols(ap.get()) << " design, "
            << tlgp_matrix_cols(yp.get()) << " timestamps -> " << dir.string()
            << "\n";
  return 0;
}

// ------------------------------------------------------------------ recover

int run_recover(const CommonOpts& opts) {
  ConfigPtr cfg = make_config(opts, "recover");
  std::string a_path = cfg_get(cfg.get(), "a_path");
  std::string y_path = cfg_get(cfg.get(), "y_path");
  if (a_path.empty() || y_path.empty()) {
    die(1, "recover requires a_path and y_path (config or --set)");
  }
  MatrixPtr a = load_matrix(a_path);
  MatrixPtr y = load_matrix(y_path);
  fs::path dir = prepare_out_dir(cfg.get());

  tlgp_result* res = nullptr;
  check(tlgp_recover(cfg.get(), a.get(), y.get(), &res), "recover");
  ResultPtr rp = wrap(res);

  tlgp_matrix* xhat = nullptr;
  check(tlgp_result_signal(res, &xhat), "reading estimate");
  MatrixPtr xp = wrap(xhat);
  tlgp_matrix* prob = nullptr;
  check(tlgp_result_spike_prob(res, &prob), "reading spike probabilities");
  MatrixPtr pp = wrap(prob);

  save_matrix(xp.get(), dir / "xhat.txt");
  save_matrix(pp.get(), dir / "spike_prob.txt");
  write_json(result_diag_json(res), dir / "diagnostics.json");
  write_manifest(cfg.get(), dir);

  MatrixPtr xt = load_optional(cfg.get(), "x_path");
  MatrixPtr omt = load_optional(cfg.get(), "omega_path");
  if (auto s = maybe_score(cfg.get(), xt.get(), omt.get(), xp.get(), pp.get())) {
    write_json(score_to_json(*s), dir / "score.json");
    std::cout << "f_measure " << s->f_measure << " nmse " << s->nmse << "\n";
  }
  std::cout << "recover: " << tlgp_result_iterations(res) << " sweeps, "
            << (tlgp_result_converged(res) ? "converged" : "max iterations")
            << " -> " << dir.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------- stream

int run_stream(const CommonOpts& opts) {
  ConfigPtr cfg = make_config(opts, "stream");
  std::string a_path = cfg_get(cfg.get(), "a_path");
  std::string y_path = cfg_get(cfg.get(), "y_path");
  if (a_path.empty() || y_path.empty()) {
    die(1, "stream requires a_path and y_path (config or --set)");
  }
  MatrixPtr a = load_matrix(a_path);
  MatrixPtr y = load_matrix(y_path);
  fs::path dir = prepare_out_dir(cfg.get());

  const int64_t total = tlgp_matrix_cols(y.get());
  int64_t t_init = std::stol(cfg_get(cfg.get(), "t_init"));
  int64_t block = std::stol(cfg_get(cfg.get(), "block"));
  if (t_init > total) {
    die(1, "t_init exceeds the number of observation columns");
  }

  MatrixPtr prefix = columns(y.get(), 0, t_init);
  tlgp_stream* stream = nullptr;
  check(tlgp_stream_init(cfg.get(), a.get(), prefix.get(), &stream),
        "stream init");
  StreamPtr sp(stream, &tlgp_stream_free);

  for (int64_t t = t_init; t < total; t += block) {
    int64_t m = std::min(block, total - t);
    MatrixPtr chunk = columns(y.get(), t, m);
    check(tlgp_stream_update(stream, chunk.get()),
          "stream update at t=" + std::to_string(t + 1));
  }

  tlgp_result* res = nullptr;
  check(tlgp_stream_result(stream, &res), "stream result");
  ResultPtr rp = wrap(res);

  tlgp_matrix* xhat = nullptr;
  check(tlgp_result_signal(res, &xhat), "reading estimate");
  MatrixPtr xp = wrap(xhat);
  tlgp_matrix* prob = nullptr;
  check(tlgp_result_spike_prob(res, &prob), "reading spike probabilities");
  MatrixPtr pp = wrap(prob);

  save_matrix(xp.get(), dir / "xhat.txt");
  save_matrix(pp.get(), dir / "spike_prob.txt");
  write_manifest(cfg.get(), dir);

  MatrixPtr xt = load_optional(cfg.get(), "x_path");
  MatrixPtr omt = load_optional(cfg.get(), "omega_path");
  if (auto s = maybe_score(cfg.get(), xt.get(), omt.get(), xp.get(), pp.get())) {
    write_json(score_to_json(*s), dir / "score.json");
    std::cout << "f_measure " << s->f_measure << " nmse " << s->nmse << "\n";
  }
  std::cout << "stream: processed " << tlgp_stream_timestamp(stream)
            << " timestamps -> " << dir.string() << "\n";
  return 0;
}

// --------------------------------------------------------------------- eval

int run_eval(const CommonOpts& opts) {
  ConfigPtr cfg = make_config(opts, "eval");
  std::string x_path = cfg_get(cfg.get(), "x_path");
  std::string est_path = cfg_get(cfg.get(), "estimate_path");
  if (x_path.empty() || est_path.empty()) {
    die(1, "eval requires x_path and estimate_path (config or --set)");
  }
  MatrixPtr xt = load_matrix(x_path);
  MatrixPtr est = load_matrix(est_path);
  MatrixPtr omt = load_optional(cfg.get(), "omega_path");
  MatrixPtr prob = load_optional(cfg.get(), "prob_path");

  fs::path dir = prepare_out_dir(cfg.get());
  auto s = maybe_score(cfg.get(), xt.get(), omt.get(), est.get(), prob.get());
  write_json(score_to_json(*s), dir / "score.json");
  write_manifest(cfg.get(), dir);
  std::cout << "f_measure " << s->f_measure << " nmse " << s->nmse
            << " precision " << s->precision << " recall " << s->recall
            << "\n";
  return 0;
}

// -------------------------------------------------------------------- bench

int run_bench(const CommonOpts& opts) {
  ConfigPtr cfg = make_config(opts, "bench");
  fs::path dir = prepare_out_dir(cfg.get());
  write_manifest(cfg.get(), dir);

  std::vector<double> ratios;
  {
    std::string list = cfg_get(cfg.get(), "ratios");
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) ratios.push_back(std::stod(tok));
  }
  std::vector<std::string> methods;
  {
    std::string list = cfg_get(cfg.get(), "bench_methods");
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) methods.push_back(tok);
  }
  const int n = std::stoi(cfg_get(cfg.get(), "n"));
  const int seeds = std::stoi(cfg_get(cfg.get(), "bench_seeds"));
  const double thr = std::stod(cfg_get(cfg.get(), "support_threshold"));
  const bool auto_lambda = cfg_get(cfg.get(), "admm_lambda") == "-1";

  std::ofstream results(dir / "results.jsonl");
  if (!results) die(2, "cannot write results file");

  auto cell_config = [&](double ratio, int seed) {
    CommonOpts cell_opts = opts;
    ConfigPtr c = make_config(cell_opts, "bench");
    int k = std::max<int>(1, static_cast<int>(std::lround(ratio * n)));
    cfg_set(c.get(), "k", std::to_string(k));
    cfg_set(c.get(), "seed", std::to_string(seed));
    return c;
  };

  auto generate_cell = [&](const tlgp_config* c, MatrixPtr& a, MatrixPtr& y,
                           MatrixPtr& xt, MatrixPtr& omt) {
    tlgp_matrix *am = nullptr, *ym = nullptr, *xm = nullptr, *om = nullptr;
    check(tlgp_generate(c, &am, &ym, &xm, &om), "bench generate");
    a = wrap(am);
    y = wrap(ym);
    xt = wrap(xm);
    omt = wrap(om);
  };

  const bool wants_admm =
      std::find(methods.begin(), methods.end(), "admm") != methods.end();

  for (double ratio : ratios) {
    // The baseline's lambda is grid-selected once per ratio on a held-out
    // seed, then frozen for the scored seeds.
    std::optional<double> frozen_lambda;
    if (auto_lambda && wants_admm) {
      ConfigPtr held = cell_config(ratio, 1000);
      MatrixPtr a(nullptr, &tlgp_matrix_free), y(nullptr, &tlgp_matrix_free),
          xt(nullptr, &tlgp_matrix_free), omt(nullptr, &tlgp_matrix_free);
      generate_cell(held.get(), a, y, xt, omt);
      double lambda = 0.0;
      check(tlgp_lasso_select_lambda(held.get(), a.get(), y.get(), xt.get(),
                                     &lambda),
            "bench lambda selection");
      frozen_lambda = lambda;
    }

    for (int seed = 0; seed < seeds; ++seed) {
      ConfigPtr c = cell_config(ratio, seed);
      if (frozen_lambda) {
        cfg_set(c.get(), "admm_lambda", std::to_string(*frozen_lambda));
      }
      MatrixPtr a(nullptr, &tlgp_matrix_free), y(nullptr, &tlgp_matrix_free),
          xt(nullptr, &tlgp_matrix_free), omt(nullptr, &tlgp_matrix_free);
      generate_cell(c.get(), a, y, xt, omt);

      for (const std::string& method : methods) {
        tlgp_score s{};
        int iterations = 0;
        double wall = 0.0;
        if (method == "ep") {
          tlgp_result* res = nullptr;
          check(tlgp_recover(c.get(), a.get(), y.get(), &res), "bench recover");
          ResultPtr rp = wrap(res);
          tlgp_matrix *xe = nullptr, *pe = nullptr;
          check(tlgp_result_signal(res, &xe), "bench estimate");
          MatrixPtr xep = wrap(xe);
          check(tlgp_result_spike_prob(res, &pe), "bench probs");
          MatrixPtr pep = wrap(pe);
          check(tlgp_evaluate(xt.get(), omt.get(), xep.get(), pep.get(), thr, &s),
                "bench score");
          iterations = tlgp_result_iterations(res);
          wall = tlgp_result_wall_seconds(res);
        } else if (method == "ep_online") {
          int64_t t_init = std::stol(cfg_get(c.get(), "t_init"));
          int64_t block = std::stol(cfg_get(c.get(), "block"));
          int64_t total = tlgp_matrix_cols(y.get());
          t_init = std::min<int64_t>(t_init, total);
          MatrixPtr prefix = columns(y.get(), 0, t_init);
          tlgp_stream* stream = nullptr;
          check(tlgp_stream_init(c.get(), a.get(), prefix.get(), &stream),
                "bench stream init");
          StreamPtr sp(stream, &tlgp_stream_free);
          for (int64_t t = t_init; t < total; t += block) {
            int64_t m = std::min(block, total - t);
            MatrixPtr chunk = columns(y.get(), t, m);
            check(tlgp_stream_update(stream, chunk.get()), "bench stream");
          }
          tlgp_result* res = nullptr;
          check(tlgp_stream_result(stream, &res), "bench stream result");
          ResultPtr rp = wrap(res);
          tlgp_matrix *xe = nullptr, *pe = nullptr;
          check(tlgp_result_signal(res, &xe), "bench estimate");
          MatrixPtr xep = wrap(xe);
          check(tlgp_result_spike_prob(res, &pe), "bench probs");
          MatrixPtr pep = wrap(pe);
          check(tlgp_evaluate(xt.get(), omt.get(), xep.get(), pep.get(), thr, &s),
                "bench score");
          iterations = tlgp_result_iterations(res);
          wall = tlgp_result_wall_seconds(res);
        } else {  // admm
          tlgp_result* res = nullptr;
          check(tlgp_lasso(c.get(), a.get(), y.get(), &res), "bench lasso");
          ResultPtr rp = wrap(res);
          tlgp_matrix* xe = nullptr;
          check(tlgp_result_signal(res, &xe), "bench estimate");
          MatrixPtr xep = wrap(xe);
          check(tlgp_evaluate(xt.get(), omt.get(), xep.get(), nullptr, thr, &s),
                "bench score");
          iterations = tlgp_result_iterations(res);
          wall = tlgp_result_wall_seconds(res);
        }
        nlohmann::json rec = score_to_json(s);
        rec["method"] = method;
        rec["ratio"] = ratio;
        rec["seed"] = seed;
        rec["iterations"] = iterations;
        rec["wall_seconds"] = wall;
        results << rec.dump() << "\n";
        results.flush();
        std::cout << "ratio " << ratio << " seed " << seed << " " << method
                  << ": F=" << s.f_measure << " NMSE=" << s.nmse << "\n";
      }
    }
  }
  std::cout << "bench results -> " << (dir / "results.jsonl").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical spike-and-slab sparse regression with a "
               "two-level GP prior (offline and streaming EP inference)"};
  app.require_subcommand(1);

  CommonOpts gen_opts, rec_opts, str_opts, eval_opts, bench_opts;
  CLI::App* gen = app.add_subcommand("generate", "Sample a synthetic dataset");
  add_common(gen, gen_opts);
  CLI::App* rec = app.add_subcommand("recover", "Offline EP signal recovery");
  add_common(rec, rec_opts);
  CLI::App* str = app.add_subcommand("stream", "Online filtering recovery");
  add_common(str, str_opts);
  CLI::App* ev = app.add_subcommand("eval", "Score an estimate against truth");
  add_common(ev, eval_opts);
  CLI::App* ben = app.add_subcommand("bench", "Ratio x seed x method sweep");
  add_common(ben, bench_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return run_generate(gen_opts);
    if (rec->parsed()) return run_recover(rec_opts);
    if (str->parsed()) return run_stream(str_opts);
    if (ev->parsed()) return run_eval(eval_opts);
    if (ben->parsed()) return run_bench(bench_opts);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
