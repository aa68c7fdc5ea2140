#pragma once

// Independent re-computations used as test oracles. None of them goes through
// the solver's assembled matrices.

#include "relslope/eigensys.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

/// V(f, g) = int int C(s,t) f(s) g(t) by tensor trapezoid on the kernel grid.
inline double v_form(const relslope::Curve2D& C, const relslope::Curve& f, const relslope::Curve& g) {
  const Eigen::VectorXd& w = C.grid_s().weights();
  return f.values().cwiseProduct(w).dot(C.values() * g.values().cwiseProduct(w));
}

/// Values, first and second derivatives of phi_k on a dense midpoint grid,
/// derivatives by central differences of the point values.
struct DenseCurve {
  Eigen::VectorXd d0, d1, d2;
  double h = 0.0;
};

inline double point_value(const relslope::EigenSystem& sys, int k, double x) {
  x = std::clamp(x, 0.0, 1.0);
  return sys.spline.evaluate(x, 0).dot(sys.coefficients.col(k));
}

inline DenseCurve dense(const relslope::EigenSystem& sys, int k, int cells = 20000) {
  DenseCurve c;
  c.h = 1.0 / cells;
  c.d0.resize(cells);
  c.d1.resize(cells);
  c.d2.resize(cells);
  const double e = 1e-4;
  for (int i = 0; i < cells; ++i) {
    // keep the difference stencil inside [0,1]
    const double x = std::clamp((i + 0.5) * c.h, e, 1.0 - e);
    const double fm = point_value(sys, k, x - e), f0 = point_value(sys, k, x), fp = point_value(sys, k, x + e);
    c.d0[i] = f0;
    c.d1[i] = (fp - fm) / (2 * e);
    c.d2[i] = (fp - 2 * f0 + fm) / (e * e);
  }
  return c;
}

/// J_l(phi_k, phi_j) with the (l-1)-shifted penalty, midpoint rule.
inline double j_form(const DenseCurve& a, const DenseCurve& b, int shift = 0) {
  const double w = shift * std::numbers::pi;
  return a.h * (a.d2.dot(b.d2) + 2 * w * w * a.d1.dot(b.d1) + w * w * w * w * a.d0.dot(b.d0));
}

}  // namespace oracle
