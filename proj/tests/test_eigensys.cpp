#include "oracles.hpp"
#include "relslope/eigensys.hpp"
#include "relslope/errors.hpp"
#include "relslope/rng.hpp"
#include "relslope/simharness.hpp"
#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace relslope;
using Catch::Approx;

namespace {

Curve2D sample_cov(PredictorKind kind, std::size_t n, std::uint64_t seed) {
  return empirical_covariance(gen_predictors(kind, n, Grid(), seed));
}

const Curve2D& iid_cov() {
  static const Curve2D c = sample_cov(PredictorKind::iid, 500, 17);
  return c;
}

}  // namespace

TEST_CASE("rank-one covariance admits exactly one eigenpair") {
  const Grid g;
  const auto f = Curve::from_function(g, [](double t) { return 1.0 + t * t; });
  const Curve2D C(g, g, f.values() * f.values().transpose());
  const auto sys = solve_eigen_scalar(C, 1);
  CHECK(sys.r == 1);
  CHECK(oracle::v_form(C, sys.basis[0], sys.basis[0]) == Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(solve_eigen_scalar(C, 2), NumericalError);
}

TEST_CASE("simultaneous diagonalization by independent quadrature") {
  for (auto kind : {PredictorKind::iid, PredictorKind::fma1}) {
    const auto C = sample_cov(kind, 500, 23);
    const auto sys = solve_eigen_scalar(C, 10);
    REQUIRE(sys.r == 10);
    std::vector<oracle::DenseCurve> d;
    for (int k = 0; k < 10; ++k) d.push_back(oracle::dense(sys, k));
    for (int k = 0; k < 10; ++k) {
      if (k > 0) CHECK(sys.rhos[k] >= sys.rhos[k - 1]);
      CHECK(sys.rhos[k] >= 0.0);
      for (int j = 0; j < 10; ++j) {
        const double delta = k == j ? 1.0 : 0.0;
        CHECK(std::abs(oracle::v_form(C, sys.basis[k], sys.basis[j]) - delta) <= 1e-6);
        CHECK(std::abs(oracle::j_form(d[k], d[j]) - sys.rhos[k] * delta) <= 1e-4 * (1 + sys.rhos[k]));
      }
    }
  }
}

TEST_CASE("weak-form residual against random test functions in the spline span") {
  const auto& C = iid_cov();
  const auto sys = solve_eigen_scalar(C, 20);
  const auto& forms = sys.spline.forms();
  const Eigen::MatrixXd B = sys.spline.design(sys.grid);
  const Eigen::VectorXd& w = sys.grid.weights();
  const Eigen::MatrixXd V = B.transpose() * w.asDiagonal() * C.values() * w.asDiagonal() * B;
  CounterRng rng(5);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(sys.spline.dim());
    for (auto& x : a) x = rng.normal();
    for (int k = 0; k < sys.r; ++k) {
      const Eigen::VectorXd c = sys.coefficients.col(k);
      const double lhs = sys.rhos[k] * c.dot(V * a);
      const double rhs = c.dot(forms.bending * a);
      CHECK(std::abs(lhs - rhs) <= 1e-6 * (1 + sys.rhos[k]) * std::max(1.0, a.norm()));
    }
  }
}

TEST_CASE("sign convention and J-null space") {
  const auto sys = solve_eigen_scalar(iid_cov(), 8);
  for (int k = 0; k < sys.r; ++k) {
    CHECK(inner_l2(sys.basis[k], Curve::constant(sys.grid, 1.0)) >= -1e-10 * std::sqrt(norm_l2_sq(sys.basis[k])));
  }
  // linear functions carry no bending energy
  CHECK(sys.rhos[0] == Approx(0.0).margin(1e-6));
  CHECK(sys.rhos[1] == Approx(0.0).margin(1e-6));
  CHECK(sys.rhos[2] > 1.0);
}

TEST_CASE("scaling the covariance divides rho and rescales phi") {
  const auto& C = iid_cov();
  const double c = 3.7;
  const Curve2D Cc(C.grid_s(), C.grid_t(), c * C.values());
  const auto a = solve_eigen_scalar(C, 10);
  const auto b = solve_eigen_scalar(Cc, 10);
  for (int k = 2; k < 10; ++k) {
    CHECK(b.rhos[k] == Approx(a.rhos[k] / c).epsilon(1e-8));
    const Eigen::VectorXd pa = a.basis[k].values() / std::sqrt(c);
    const Eigen::VectorXd pb = b.basis[k].values();
    const double sgn = pa.dot(pb) >= 0 ? 1.0 : -1.0;
    CHECK((pb - sgn * pa).norm() <= 1e-8 * pa.norm());
  }
}

TEST_CASE("functional eigen-systems") {
  const auto& C = iid_cov();
  const auto tsys = solve_eigen_functional(C, 6);
  const auto scalar = solve_eigen_scalar(C, 6);
  REQUIRE(tsys.per_frequency.size() == 6);
  REQUIRE(tsys.cosine.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(tsys.per_frequency[0].rhos[k] == Approx(scalar.rhos[k]).margin(1e-10 * (1 + scalar.rhos[k])));
  for (std::size_t l = 0; l + 1 < 6; ++l) {
    for (int k = 0; k < 6; ++k) CHECK(tsys.per_frequency[l + 1].rhos[k] >= tsys.per_frequency[l].rhos[k] * (1 - 1e-10));
  }
  for (std::size_t l = 0; l < 6; ++l) {
    const auto& sys = tsys.per_frequency[l];
    CHECK(sys.frequency_shift == static_cast<int>(l));
    for (std::size_t i = 0; i < sys.grid.size(); ++i) REQUIRE(tsys.cosine[l][i] == cosine_function(l + 1, sys.grid.point(i)));
    std::vector<oracle::DenseCurve> d;
    for (int k = 0; k < 6; ++k) d.push_back(oracle::dense(sys, k, 8000));
    for (int k = 0; k < 6; ++k) {
      for (int j = 0; j < 6; ++j) {
        const double delta = k == j ? 1.0 : 0.0;
        CHECK(std::abs(oracle::v_form(C, sys.basis[k], sys.basis[j]) - delta) <= 1e-6);
        CHECK(std::abs(oracle::j_form(d[k], d[j], static_cast<int>(l)) - sys.rhos[k] * delta) <= 1e-4 * (1 + sys.rhos[k]));
      }
    }
  }
}

TEST_CASE("L2 Gram matrix") {
  const auto one = solve_eigen_scalar(iid_cov(), 1);
  const auto g1 = gram_l2(one);
  REQUIRE(g1.rows() == 1);
  CHECK(g1(0, 0) >= 0.0);
  CHECK(g1(0, 0) == Approx(norm_l2_sq(one.basis[0])));
  const auto sys = solve_eigen_scalar(iid_cov(), 20);
  const auto G = gram_l2(sys);
  CHECK((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("eigen solve contracts") {
  const auto& C = iid_cov();
  CHECK_THROWS_AS(solve_eigen_scalar(C, 5, 40, 3), ContractError);
  CHECK_THROWS_AS(solve_eigen_scalar(C, 39, 40), ContractError);
  CHECK_THROWS_AS(solve_eigen_scalar(C, 0), ContractError);
  Eigen::MatrixXd m = C.values();
  m(3, 7) += 1.0;
  CHECK_THROWS_AS(solve_eigen_scalar(Curve2D(C.grid_s(), C.grid_t(), m), 5), ContractError);
  CHECK(default_truncation(200) == 20);
  CHECK(default_truncation(40) == 10);
  CHECK(default_truncation(2) == 1);
}

TEST_CASE("eigen-system save and load") {
  const auto dir = testing::scratch_dir("eigensys_io");
  const auto sys = solve_eigen_scalar(iid_cov(), 5);
  save_eigen_system(sys, dir / "sys");
  const auto back = load_eigen_system(dir / "sys");
  CHECK(back.r == sys.r);
  CHECK(back.rhos == sys.rhos);
  CHECK(back.coefficients == sys.coefficients);
  for (int k = 0; k < sys.r; ++k) CHECK(back.basis[k].values() == sys.basis[k].values());
  CHECK(back.metric.values() == sys.metric.values());
}
