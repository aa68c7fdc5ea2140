#pragma once

#include "relslope/funcspace.hpp"

#include <Eigen/Dense>

namespace relslope {

/// Clamped cubic B-spline basis with uniform interior knots on [0,1].
class CubicBSplineBasis {
 public:
  static constexpr int kDegree = 3;

  explicit CubicBSplineBasis(int dim = 40);

  int dim() const { return dim_; }
  int intervals() const { return dim_ - kDegree; }
  const Eigen::Array<double, 1, Eigen::Dynamic>& knots() const { return knots_; }

  /// Values (deriv = 0), first or second derivatives of all basis functions at x.
  Eigen::VectorXd evaluate(double x, int deriv = 0) const;
  /// Rows are grid points, columns basis functions.
  Eigen::MatrixXd design(const Grid& grid, int deriv = 0) const;

  /// Gram matrices of the basis under int psi_i^(d) psi_j^(d), for d = 0, 1, 2,
  /// integrated exactly with Gauss-Legendre on every knot interval.
  struct Forms {
    Eigen::MatrixXd mass;       // int psi_i psi_j
    Eigen::MatrixXd stiffness;  // int psi_i' psi_j'
    Eigen::MatrixXd bending;    // int psi_i'' psi_j''
  };
  const Forms& forms() const { return forms_; }

  BasisSet to_basis_set(const Grid& grid) const;

 private:
  int dim_;
  Eigen::Array<double, 1, Eigen::Dynamic> knots_;
  Forms forms_;
};

}  // namespace relslope
