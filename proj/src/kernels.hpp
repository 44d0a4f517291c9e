#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tlgp {

enum class KernelKind { squared_exponential, dipole };

/// Covariance-matrix recipe for the spatial GP (Sigma0), the temporal GP (W)
/// and the EEG dipole variant.
struct KernelSpec {
  KernelKind kind = KernelKind::squared_exponential;
  double amplitude = 1.0;    // alpha
  double lengthscale = 1.0;  // ell
  double jitter = -1.0;      // < 0 selects the default 1e-6 * amplitude

  // Dipole kind only: one 3-D location per voxel; the covariance is indexed
  // by (voxel, axis) pairs in x,y,z interleaved order.
  std::vector<Eigen::Vector3d> locations;
  double distance_scale = 1.0;
  // The literal distance definition gives maximal covariance across axes;
  // default is the collinearity reading (cross-axis covariance 0).
  bool cross_axis_literal = false;
};

/// K(i,j) = alpha * exp(-(i-j)^2 / (2 ell^2)) + jitter on the diagonal.
Eigen::MatrixXd build_se_kernel(int n, double alpha, double ell, double jitter);

/// Dipole covariance over 3*locations.size() moment indices: same-axis pairs
/// get alpha * exp(-scale*||loc_i - loc_j||^2 / (2 ell^2)), different-axis
/// pairs get 0 (or the literal alpha*exp(0) behind cross_axis_literal).
Eigen::MatrixXd build_dipole_kernel(const std::vector<Eigen::Vector3d>& locations,
                                    double alpha, double ell, double jitter,
                                    double distance_scale = 1.0,
                                    bool cross_axis_literal = false);

/// Dispatch on spec.kind; n must equal 3*locations for the dipole kind.
Eigen::MatrixXd build_kernel(const KernelSpec& spec, int n);

/// m + jitter*I, with the jitter doubled up to 6 times until a Cholesky
/// factorization succeeds. Persistent failure raises ErrorCode::numeric with
/// the smallest-eigenvalue estimate in the message.
Eigen::MatrixXd ensure_psd(const Eigen::MatrixXd& m, double jitter);

/// Plain-text locations file: one voxel per line, "x y z" columns.
std::vector<Eigen::Vector3d> load_locations(const std::string& path);

}  // namespace tlgp
