#include "relslope/spline.hpp"

#include "relslope/errors.hpp"

#include <unsupported/Eigen/Splines>

#include <array>
#include <cmath>

namespace relslope {

namespace {

using SplineType = Eigen::Spline<double, 1, CubicBSplineBasis::kDegree>;

// 4-point Gauss-Legendre on [-1,1]; exact through degree 7.
constexpr std::array<double, 4> kGaussNodes{-0.8611363115940526, -0.3399810435848563,
                                            0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGaussWeights{0.3478548451374538, 0.6521451548625461,
                                              0.6521451548625461, 0.3478548451374538};

}  // namespace

CubicBSplineBasis::CubicBSplineBasis(int dim) : dim_(dim) {
  require(dim >= kDegree + 2, "CubicBSplineBasis: dimension must be at least 5");
  const int n_int = intervals();
  knots_.resize(dim_ + kDegree + 1);
  for (Eigen::Index i = 0; i < knots_.size(); ++i) {
    const int j = std::clamp(static_cast<int>(i) - kDegree, 0, n_int);
    knots_(i) = static_cast<double>(j) / n_int;
  }

  forms_.mass = Eigen::MatrixXd::Zero(dim_, dim_);
  forms_.stiffness = Eigen::MatrixXd::Zero(dim_, dim_);
  forms_.bending = Eigen::MatrixXd::Zero(dim_, dim_);
  const double h = 1.0 / n_int;
  for (int cell = 0; cell < n_int; ++cell) {
    const double left = cell * h;
    for (std::size_t g = 0; g < kGaussNodes.size(); ++g) {
      const double x = left + 0.5 * h * (kGaussNodes[g] + 1.0);
      const double w = 0.5 * h * kGaussWeights[g];
      const auto span = SplineType::Span(x, kDegree, knots_);
      const auto ders = SplineType::BasisFunctionDerivatives(x, 2, kDegree, knots_);
      const auto first = static_cast<int>(span) - kDegree;
      for (int a = 0; a <= kDegree; ++a) {
        for (int b = 0; b <= kDegree; ++b) {
          forms_.mass(first + a, first + b) += w * ders(0, a) * ders(0, b);
          forms_.stiffness(first + a, first + b) += w * ders(1, a) * ders(1, b);
          forms_.bending(first + a, first + b) += w * ders(2, a) * ders(2, b);
        }
      }
    }
  }
}

Eigen::VectorXd CubicBSplineBasis::evaluate(double x, int deriv) const {
  require(deriv >= 0 && deriv <= 2, "CubicBSplineBasis::evaluate: derivative order must be 0..2");
  x = std::clamp(x, 0.0, 1.0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  const auto span = SplineType::Span(x, kDegree, knots_);
  const auto ders = SplineType::BasisFunctionDerivatives(x, deriv, kDegree, knots_);
  const auto first = static_cast<int>(span) - kDegree;
  for (int a = 0; a <= kDegree; ++a) out[first + a] = ders(deriv, a);
  return out;
}

Eigen::MatrixXd CubicBSplineBasis::design(const Grid& grid, int deriv) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), dim_);
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = evaluate(grid.point(i), deriv).transpose();
  return out;
}

BasisSet CubicBSplineBasis::to_basis_set(const Grid& grid) const {
  const Eigen::MatrixXd values = design(grid, 0);
  const Eigen::MatrixXd second = design(grid, 2);
  BasisSet basis{grid, {}, BasisKind::galerkin_spline, std::vector<Curve>{}};
  for (int j = 0; j < dim_; ++j) {
    basis.functions.emplace_back(grid, values.col(j));
    basis.second_derivatives->emplace_back(grid, second.col(j));
  }
  return basis;
}

}  // namespace relslope
