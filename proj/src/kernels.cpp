#include "kernels.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tlgp {

namespace {

void check_kernel_params(double alpha, double ell, double jitter) {
  if (!(alpha > 0.0)) {
    fail(ErrorCode::invalid_argument, "kernel amplitude must be positive");
  }
  if (!(ell > 0.0)) {
    fail(ErrorCode::invalid_argument, "kernel lengthscale must be positive");
  }
  if (jitter < 0.0) {
    fail(ErrorCode::invalid_argument, "kernel jitter must be nonnegative");
  }
}

}  // namespace

Eigen::MatrixXd build_se_kernel(int n, double alpha, double ell, double jitter) {
  check_kernel_params(alpha, ell, jitter);
  if (n < 1) fail(ErrorCode::invalid_argument, "kernel dimension must be >= 1");
  Eigen::MatrixXd k(n, n);
  const double inv2l2 = 1.0 / (2.0 * ell * ell);
  for (int i = 0; i < n; ++i) {
    k(i, i) = alpha + jitter;
    for (int j = 0; j < i; ++j) {
      double d = static_cast<double>(i - j);
      double v = alpha * std::exp(-d * d * inv2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd build_dipole_kernel(const std::vector<Eigen::Vector3d>& locations,
                                    double alpha, double ell, double jitter,
                                    double distance_scale,
                                    bool cross_axis_literal) {
  check_kernel_params(alpha, ell, jitter);
  if (locations.empty()) {
    fail(ErrorCode::invalid_argument, "dipole kernel requires locations");
  }
  const int n = 3 * static_cast<int>(locations.size());
  Eigen::MatrixXd k(n, n);
  const double inv2l2 = 1.0 / (2.0 * ell * ell);
  for (int i = 0; i < n; ++i) {
    const int vi = i / 3, ai = i % 3;
    k(i, i) = alpha + jitter;
    for (int j = 0; j < i; ++j) {
      const int vj = j / 3, aj = j % 3;
      double v;
      if (ai != aj) {
        v = cross_axis_literal ? alpha : 0.0;
      } else {
        double d2 = (locations[vi] - locations[vj]).squaredNorm();
        v = alpha * std::exp(-distance_scale * d2 * inv2l2);
      }
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd build_kernel(const KernelSpec& spec, int n) {
  double jitter = spec.jitter < 0.0 ? 1e-6 * spec.amplitude : spec.jitter;
  switch (spec.kind) {
    case KernelKind::squared_exponential:
      return build_se_kernel(n, spec.amplitude, spec.lengthscale, jitter);
    case KernelKind::dipole: {
      if (n != 3 * static_cast<int>(spec.locations.size())) {
        fail(ErrorCode::dimension_mismatch,
             "dipole kernel dimension " + std::to_string(n) +
                 " does not match 3 * " +
                 std::to_string(spec.locations.size()) + " locations");
      }
      return build_dipole_kernel(spec.locations, spec.amplitude,
                                 spec.lengthscale, jitter, spec.distance_scale,
                                 spec.cross_axis_literal);
    }
  }
  fail(ErrorCode::invalid_argument, "unknown kernel kind");
}

Eigen::MatrixXd ensure_psd(const Eigen::MatrixXd& m, double jitter) {
  if (m.rows() != m.cols()) {
    fail(ErrorCode::dimension_mismatch, "ensure_psd requires a square matrix");
  }
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(ErrorCode::invalid_argument, "ensure_psd requires a symmetric matrix");
  }
  if (jitter < 0.0) fail(ErrorCode::invalid_argument, "jitter must be >= 0");

  Eigen::MatrixXd out =
      m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  double extra = jitter > 0.0 ? jitter : 1e-12 * scale;
  for (int attempt = 0; attempt <= 6; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(out);
    if (llt.info() == Eigen::Success) return out;
    out += extra * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    extra *= 2.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  fail(ErrorCode::numeric,
       "matrix is not positive definite after jitter escalation; smallest "
       "eigenvalue ~ " +
           std::to_string(es.eigenvalues().minCoeff()));
}

std::vector<Eigen::Vector3d> load_locations(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open locations file: " + path);
  std::vector<Eigen::Vector3d> locs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) {
      fail(ErrorCode::parse, path + ": malformed location at line " +
                                 std::to_string(lineno));
    }
    locs.emplace_back(x, y, z);
  }
  if (locs.empty()) fail(ErrorCode::parse, path + ": no locations found");
  return locs;
}

}  // namespace tlgp
