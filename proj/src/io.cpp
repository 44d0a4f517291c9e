#include "io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace tlgp {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_token(std::string_view tok, const std::string& where) {
  double v;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    fail(ErrorCode::parse, where + ": invalid number \"" + std::string(tok) + "\"");
  }
  return v;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open matrix file: " + path);

  std::string line;
  int lineno = 0;
  // Header: "rows cols".
  do {
    if (!std::getline(in, line)) {
      fail(ErrorCode::parse, path + ": missing header");
    }
    ++lineno;
  } while (trim(line).empty());

  auto header = split_tokens(line);
  if (header.size() != 2) {
    fail(ErrorCode::parse,
         path + ": malformed header at line " + std::to_string(lineno));
  }
  long rows = 0, cols = 0;
  try {
    rows = std::stol(header[0]);
    cols = std::stol(header[1]);
  } catch (...) {
    fail(ErrorCode::parse,
         path + ": malformed header at line " + std::to_string(lineno));
  }
  if (rows < 1 || cols < 1) {
    fail(ErrorCode::parse, path + ": non-positive shape in header");
  }

  Eigen::MatrixXd m(rows, cols);
  long r = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (r >= rows) {
      fail(ErrorCode::parse, path + ": extra row at line " +
                                 std::to_string(lineno) + " (expected " +
                                 std::to_string(rows) + " rows)");
    }
    auto toks = split_tokens(t);
    if (static_cast<long>(toks.size()) != cols) {
      fail(ErrorCode::parse,
           path + ": expected " + std::to_string(cols) + " values at line " +
               std::to_string(lineno) + ", got " + std::to_string(toks.size()));
    }
    for (long c = 0; c < cols; ++c) {
      m(r, c) = parse_double_token(toks[c],
                                   path + " line " + std::to_string(lineno));
    }
    ++r;
  }
  if (r != rows) {
    fail(ErrorCode::parse, path + ": expected " + std::to_string(rows) +
                               " rows, found " + std::to_string(r));
  }
  return m;
}

void save_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write matrix file: " + path);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

std::vector<Eigen::VectorXd> load_timestamp_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open records file: " + path);
  std::vector<Eigen::VectorXd> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto toks = split_tokens(t);
    Eigen::VectorXd v(toks.size());
    for (size_t i = 0; i < toks.size(); ++i) {
      v(i) = parse_double_token(toks[i],
                                path + " line " + std::to_string(lineno));
    }
    if (!records.empty() && records.front().size() != v.size()) {
      fail(ErrorCode::parse, path + ": record length changed at line " +
                                 std::to_string(lineno));
    }
    records.push_back(std::move(v));
  }
  return records;
}

namespace {

const char* kernel_kind_name(KernelKind k) {
  return k == KernelKind::dipole ? "dipole" : "squared_exponential";
}

const char* generator_name(GeneratorKind g) {
  return g == GeneratorKind::model ? "model" : "groups";
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

// A config key: how to parse a value into the config and how to print it.
struct KeyHandler {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& v, const std::string& where) {
  return parse_double_token(v, where);
}

long to_long(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    fail(ErrorCode::parse, where + ": invalid integer \"" + v + "\"");
  }
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::parse, where + ": invalid boolean \"" + v + "\"");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(v);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

const std::map<std::string, KeyHandler>& key_table() {
  static const std::map<std::string, KeyHandler> table = {
      {"mode",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          if (v == "generate") c.mode = RunMode::generate;
          else if (v == "recover") c.mode = RunMode::recover;
          else if (v == "stream") c.mode = RunMode::stream;
          else if (v == "eval") c.mode = RunMode::eval;
          else if (v == "bench") c.mode = RunMode::bench;
          else fail(ErrorCode::parse, w + ": unknown mode \"" + v + "\"");
        },
        [](const RunConfig& c) { return std::string(run_mode_name(c.mode)); }}},
      {"sigma_x2",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.sigma2_x = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.sigma2_x); }}},
      {"sigma2",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.sigma2 = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.sigma2); }}},
      {"eta",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.eta = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.eta); }}},
      {"xi",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.xi = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.xi); }}},
      {"ell_W",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.ell_w = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.ell_w); }}},
      {"ell_Sigma",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.ell_sigma = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.ell_sigma); }}},
      {"alpha_W",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.alpha_w = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.alpha_w); }}},
      {"alpha_Sigma",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.alpha_sigma = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.alpha_sigma); }}},
      {"tolerance",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.tolerance = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.tolerance); }}},
      {"max_iters",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.max_iters = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.hp.max_iters); }}},
      {"neg_var_replacement",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.neg_var_replacement = to_double(v, w);
        },
        [](const RunConfig& c) {
          return format_double(c.hp.neg_var_replacement);
        }}},
      {"shared_covariances",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.shared_covariances = to_bool(v, w);
        },
        [](const RunConfig& c) {
          return std::string(c.hp.shared_covariances ? "true" : "false");
        }}},
      {"kernel",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          if (v == "squared_exponential")
            c.hp.kernel_kind = KernelKind::squared_exponential;
          else if (v == "dipole") c.hp.kernel_kind = KernelKind::dipole;
          else fail(ErrorCode::parse, w + ": unknown kernel \"" + v + "\"");
        },
        [](const RunConfig& c) {
          return std::string(kernel_kind_name(c.hp.kernel_kind));
        }}},
      {"locations",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.locations_path = v;
        },
        [](const RunConfig& c) { return c.locations_path; }}},
      {"distance_scale",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.distance_scale = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.distance_scale); }}},
      {"cross_axis_literal",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.cross_axis_literal = to_bool(v, w);
        },
        [](const RunConfig& c) {
          return std::string(c.hp.cross_axis_literal ? "true" : "false");
        }}},
      {"kernel_jitter",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.hp.kernel_jitter = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.hp.kernel_jitter); }}},
      {"n",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.n = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.n); }}},
      {"t",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.t = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.t); }}},
      {"k",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.k = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.k); }}},
      {"seed",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.seed = static_cast<std::uint64_t>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"generator",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          if (v == "groups") c.generator = GeneratorKind::groups;
          else if (v == "model") c.generator = GeneratorKind::model;
          else fail(ErrorCode::parse, w + ": unknown generator \"" + v + "\"");
        },
        [](const RunConfig& c) {
          return std::string(generator_name(c.generator));
        }}},
      {"n_groups",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.group.n_groups = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.group.n_groups); }}},
      {"target_sparsity",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.group.target_sparsity = to_double(v, w);
        },
        [](const RunConfig& c) {
          return format_double(c.group.target_sparsity);
        }}},
      {"value_variance",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.group.value_variance = to_double(v, w);
        },
        [](const RunConfig& c) {
          return format_double(c.group.value_variance);
        }}},
      {"border_move_prob",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.group.border_move_prob = to_double(v, w);
        },
        [](const RunConfig& c) {
          return format_double(c.group.border_move_prob);
        }}},
      {"obs_noise",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.obs_noise = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.obs_noise); }}},
      {"t_init",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.t_init = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.t_init); }}},
      {"block",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.block = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.block); }}},
      {"admm_lambda",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          double x = to_double(v, w);
          c.admm_auto_lambda = x < 0.0;
          if (x >= 0.0) c.admm.lambda = x;
        },
        [](const RunConfig& c) {
          return c.admm_auto_lambda ? std::string("-1")
                                    : format_double(c.admm.lambda);
        }}},
      {"admm_rho",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.admm.rho = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.admm.rho); }}},
      {"admm_max_iters",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.admm.max_iters = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.admm.max_iters); }}},
      {"admm_abs_tol",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.admm.abs_tol = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.admm.abs_tol); }}},
      {"admm_rel_tol",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.admm.rel_tol = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.admm.rel_tol); }}},
      {"support_threshold",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.support_threshold = to_double(v, w);
        },
        [](const RunConfig& c) { return format_double(c.support_threshold); }}},
      {"a_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.a_path = v;
        },
        [](const RunConfig& c) { return c.a_path; }}},
      {"y_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.y_path = v;
        },
        [](const RunConfig& c) { return c.y_path; }}},
      {"x_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.x_path = v;
        },
        [](const RunConfig& c) { return c.x_path; }}},
      {"omega_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.omega_path = v;
        },
        [](const RunConfig& c) { return c.omega_path; }}},
      {"estimate_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.estimate_path = v;
        },
        [](const RunConfig& c) { return c.estimate_path; }}},
      {"prob_path",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.prob_path = v;
        },
        [](const RunConfig& c) { return c.prob_path; }}},
      {"out_dir",
       {[](RunConfig& c, const std::string& v, const std::string&) {
          c.out_dir = v;
        },
        [](const RunConfig& c) { return c.out_dir; }}},
      {"ratios",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.ratios.clear();
          for (const auto& tok : split_list(v))
            c.ratios.push_back(to_double(tok, w));
          if (c.ratios.empty()) fail(ErrorCode::parse, w + ": empty ratios");
        },
        [](const RunConfig& c) { return join_doubles(c.ratios); }}},
      {"bench_seeds",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.bench_seeds = static_cast<int>(to_long(v, w));
        },
        [](const RunConfig& c) { return std::to_string(c.bench_seeds); }}},
      {"bench_methods",
       {[](RunConfig& c, const std::string& v, const std::string& w) {
          c.bench_methods = split_list(v);
          for (const auto& m : c.bench_methods) {
            if (m != "ep" && m != "ep_online" && m != "admm") {
              fail(ErrorCode::parse, w + ": unknown method \"" + m + "\"");
            }
          }
        },
        [](const RunConfig& c) { return join_strings(c.bench_methods); }}},
  };
  return table;
}

}  // namespace

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::generate: return "generate";
    case RunMode::recover: return "recover";
    case RunMode::stream: return "stream";
    case RunMode::eval: return "eval";
    case RunMode::bench: return "bench";
  }
  return "unknown";
}

void RunConfig::validate() const {
  hp.validate();
  if (n < 1 || t < 1 || k < 1) {
    fail(ErrorCode::invalid_argument, "n, t, k must all be >= 1");
  }
  group.validate();
  if (obs_noise < 0.0) fail(ErrorCode::invalid_argument, "obs_noise must be >= 0");
  if (t_init < 1) fail(ErrorCode::invalid_argument, "t_init must be >= 1");
  if (block < 1) fail(ErrorCode::invalid_argument, "block must be >= 1");
  admm.validate();
  if (!(support_threshold > 0.0)) {
    fail(ErrorCode::invalid_argument, "support_threshold must be > 0");
  }
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) {
      fail(ErrorCode::invalid_argument,
           "undersampling ratios must lie in (0, 1]");
    }
  }
  if (bench_seeds < 1) {
    fail(ErrorCode::invalid_argument, "bench_seeds must be >= 1");
  }
}

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  const auto& table = key_table();
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line;
    size_t hash = stripped.find('#');
    if (hash != std::string::npos) stripped = stripped.substr(0, hash);
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    size_t eq = stripped.find('=');
    const std::string where = origin + " line " + std::to_string(lineno);
    if (eq == std::string::npos) {
      fail(ErrorCode::parse, where + ": expected \"key = value\"");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) {
      fail(ErrorCode::parse, where + ": unknown key \"" + key + "\"");
    }
    it->second.set(cfg, value, where);
  }
  if (cfg.hp.kernel_kind == KernelKind::dipole && !cfg.locations_path.empty()) {
    cfg.hp.locations = load_locations(cfg.locations_path);
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out = "# tlgp " + std::string(kVersion) + " run manifest\n";
  for (const auto& [key, handler] : key_table()) {
    out += key + " = " + handler.get(cfg) + "\n";
  }
  return out;
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write config file: " + path);
  out << config_to_text(cfg);
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

std::string score_json(const ScoreReport& s) {
  nlohmann::json j;
  j["nmse"] = s.nmse;
  j["f_measure"] = s.f_measure;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["true_support"] = s.true_support;
  j["est_support"] = s.est_support;
  j["intersection"] = s.intersection;
  j["degenerate"] = s.degenerate;
  return j.dump();
}

std::string result_record_json(const ResultRecord& r) {
  nlohmann::json j = nlohmann::json::parse(score_json(r.score));
  j["method"] = r.method;
  j["ratio"] = r.ratio;
  j["seed"] = r.seed;
  j["iterations"] = r.iterations;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

}  // namespace tlgp
