#pragma once

// Sequential ridge estimation of the slope in the truncated eigenbasis:
// for every sample fraction nu_q the first n_q = floor(n nu_q) observations
// give b_q = (Omega_q^T Omega_q + n_q lambda Lambda)^{-1} Omega_q^T Y_q.

#include "relslope/eigensys.hpp"
#include "relslope/funcspace.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace relslope {

/// Fractions nu_q = nu0 + q (1 - nu0) / Q, q = 1..Q, with nu_Q = 1.
class FractionScheme {
 public:
  FractionScheme(double nu0 = 0.5, int Q = 25);

  double nu0() const { return nu0_; }
  int count() const { return Q_; }
  /// 1-based index q.
  double fraction(int q) const;
  std::vector<double> fractions() const;
  /// Subsample sizes floor(n nu_q).
  std::vector<std::size_t> sizes(std::size_t n) const;

  bool operator==(const FractionScheme& other) const { return nu0_ == other.nu0_ && Q_ == other.Q_; }

 private:
  double nu0_;
  int Q_;
};

struct DesignScalar {
  Eigen::MatrixXd omega;        // n x r, omega_ik = int X_i phi_k
  Eigen::VectorXd lambda_diag;  // rho_1..rho_r
  Eigen::VectorXd y;

  std::size_t n() const { return static_cast<std::size_t>(omega.rows()); }
  int r() const { return static_cast<int>(omega.cols()); }
};

struct SequentialFit {
  std::vector<Eigen::VectorXd> coeffs;  // index q - 1
  double lambda = 0.0;
  FractionScheme scheme;
  Eigen::MatrixXd gram;
};

/// One block per frequency l = 1..r.
struct DesignFunctional {
  std::vector<DesignScalar> blocks;

  std::size_t n() const { return blocks.front().n(); }
};

struct SequentialFitFunctional {
  std::vector<std::vector<Eigen::VectorXd>> coeffs;  // [q - 1][l - 1]
  double lambda = 0.0;
  FractionScheme scheme;
  std::vector<Eigen::MatrixXd> grams;  // per frequency
};

struct GcvResult {
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> scores;  // +inf where a hat-matrix trace hits n_q
};

DesignScalar build_design_scalar(std::span<const Curve> X, const Eigen::VectorXd& Y, const EigenSystem& sys);

DesignFunctional build_design_functional(std::span<const Curve> X, std::span<const Curve> Y,
                                         const TensorEigenSystem& tsys);

SequentialFit ridge_path_scalar(const DesignScalar& design, double lambda, const FractionScheme& scheme,
                                const Eigen::MatrixXd& gram);

SequentialFitFunctional ridge_path_functional(const DesignFunctional& designs, double lambda,
                                              const FractionScheme& scheme, std::vector<Eigen::MatrixXd> grams);

/// Modified GCV summed over fractions; ties go to the smaller lambda.
GcvResult gcv_select_scalar(const DesignScalar& design, const FractionScheme& scheme,
                            std::span<const double> lambda_grid);

/// As gcv_select_scalar with residuals and traces summed over frequencies.
GcvResult gcv_select_functional(const DesignFunctional& designs, const FractionScheme& scheme,
                                std::span<const double> lambda_grid);

/// 30 log-spaced values in [1e-8, 1e2], divided by n.
std::vector<double> default_lambda_grid(std::size_t n);

/// Estimate at fraction nu_q (q is 1-based) on the eigen-system grid.
Curve evaluate_estimate(const SequentialFit& fit, const EigenSystem& sys, int q);
Curve2D evaluate_estimate(const SequentialFitFunctional& fit, const TensorEigenSystem& tsys, int q);

/// Solves the symmetric system A x = b: Cholesky when well conditioned,
/// otherwise a spectral pseudo-inverse. Throws NumericalError (with
/// `context`) if the normal-equation residual stays large.
Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                       const std::string& context);

}  // namespace relslope
