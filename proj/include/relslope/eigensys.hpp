#pragma once

// Empirical simultaneous diagonalization of the covariance form
//   V(f, g) = int int C_X(s,t) f(s) g(t) ds dt
// and the roughness penalty J (order m = 2), solved in weak (Galerkin) form
// on a cubic B-spline space. The weak form imposes the natural boundary
// conditions without boundary rows.

#include "relslope/funcspace.hpp"
#include "relslope/spline.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace relslope {

inline constexpr int kDefaultGalerkinDim = 40;

/// Truncated eigen-system {(rho_k, phi_k)}: V(phi_k, phi_j) = delta_kj and
/// J(phi_k, phi_j) = rho_k delta_kj, rhos ascending.
struct EigenSystem {
  Grid grid;
  std::vector<Curve> basis;
  Eigen::VectorXd rhos;
  int r = 0;
  int sobolev_order = 2;
  Curve2D metric;
  CubicBSplineBasis spline;
  /// Spline coefficients of phi_k in column k (galerkin_dim x r).
  Eigen::MatrixXd coefficients;
  /// Frequency shift (l - 1) of the penalty form; 0 for the scalar problem.
  int frequency_shift = 0;

  /// Basis values on the grid as a (grid points x r) matrix.
  Eigen::MatrixXd basis_matrix() const;
};

/// Per-frequency systems for the function-on-function problem:
/// phi_{k,l} = x_{k,l} (x) eta_l for l = 1..r.
struct TensorEigenSystem {
  std::vector<EigenSystem> per_frequency;
  std::vector<Curve> cosine;
  int r = 0;
};

/// Solves J b = rho V b in the spline space and keeps the r smallest pairs.
EigenSystem solve_eigen_scalar(const Curve2D& cov, int r, int galerkin_dim = kDefaultGalerkinDim,
                               int sobolev_order = 2);

/// For each l = 1..r solves the shifted problem with
///   J_l(x, w) = int x''w'' + 2 (l-1)^2 pi^2 int x'w' + (l-1)^4 pi^4 int x w.
TensorEigenSystem solve_eigen_functional(const Curve2D& cov, int r,
                                         int galerkin_dim = kDefaultGalerkinDim);

/// r x r matrix of L2 inner products of the eigenbasis (trapezoid rule).
Eigen::MatrixXd gram_l2(const EigenSystem& sys);

/// Default truncation: min(20, floor(n/4)), at least 1.
int default_truncation(std::size_t n);

/// Writes <prefix>_rho.csv, <prefix>_basis.csv, <prefix>_cov.csv and <prefix>.json.
void save_eigen_system(const EigenSystem& sys, const std::filesystem::path& prefix);
EigenSystem load_eigen_system(const std::filesystem::path& prefix);

}  // namespace relslope
