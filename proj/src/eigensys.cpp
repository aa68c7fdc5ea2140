#include "relslope/eigensys.hpp"

#include "relslope/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace relslope {

namespace {

constexpr double kFilterTolerance = 1e-10;

// Covariance form in the spline space together with the whitening map that
// restricts the problem to the numerically nonsingular part of V.
struct CovarianceForm {
  Eigen::MatrixXd design;   // spline values on the grid
  Eigen::MatrixXd V;
  Eigen::MatrixXd whitening;  // dim x p, whitening^T V whitening = I
};

CovarianceForm assemble_covariance_form(const Curve2D& cov, const CubicBSplineBasis& spline) {
  const Grid& grid = cov.grid_s();
  require(cov.grid_s() == cov.grid_t(), "eigen solve: covariance must live on a square grid");
  const Eigen::MatrixXd& c = cov.values();
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ContractError("eigen solve: covariance kernel is not symmetric");
  }

  CovarianceForm form;
  form.design = spline.design(grid);
  const Eigen::MatrixXd weighted = grid.weights().asDiagonal() * form.design;
  form.V = weighted.transpose() * c * weighted;
  form.V = 0.5 * (form.V + form.V.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.V);
  if (es.info() != Eigen::Success) throw NumericalError("eigen solve: covariance form eigendecomposition failed");
  const double cutoff = kFilterTolerance * std::max(form.V.trace(), 0.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > cutoff && es.eigenvalues()[i] > 0.0) kept.push_back(i);
  }
  form.whitening.resize(form.V.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    form.whitening.col(static_cast<Eigen::Index>(j)) =
        es.eigenvectors().col(kept[j]) / std::sqrt(es.eigenvalues()[kept[j]]);
  }
  return form;
}

Eigen::MatrixXd penalty_matrix(const CubicBSplineBasis& spline, int shift) {
  const auto& f = spline.forms();
  if (shift == 0) return f.bending;
  const double a = static_cast<double>(shift) * std::numbers::pi;
  const double a2 = a * a;
  return f.bending + 2.0 * a2 * f.stiffness + a2 * a2 * f.mass;
}

EigenSystem solve_with_form(const Curve2D& cov, const CubicBSplineBasis& spline, const CovarianceForm& form,
                            int r, int shift) {
  const Eigen::Index available = form.whitening.cols();
  if (available < r) {
    std::string msg = "eigen solve";
    if (shift > 0) msg += " (frequency l=" + std::to_string(shift + 1) + ")";
    msg += ": covariance has only " + std::to_string(available) + " usable directions, " + std::to_string(r) +
           " eigenpairs requested; use a larger sample or a smaller truncation r";
    throw NumericalError(msg);
  }

  const Eigen::MatrixXd J = penalty_matrix(spline, shift);
  Eigen::MatrixXd reduced = form.whitening.transpose() * J * form.whitening;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  if (es.info() != Eigen::Success) throw NumericalError("eigen solve: reduced eigenproblem failed");

  const Eigen::MatrixXd coef_all = form.whitening * es.eigenvectors();
  // Rayleigh quotients b^T J b with b^T V b = 1 are accurate near the J-null space.
  Eigen::VectorXd rq(coef_all.cols());
  for (Eigen::Index k = 0; k < coef_all.cols(); ++k) rq[k] = coef_all.col(k).dot(J * coef_all.col(k));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(coef_all.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return rq[a] < rq[b]; });

  const double rho_scale = 1.0 + rq.cwiseAbs().maxCoeff();
  const Grid& grid = cov.grid_s();
  EigenSystem sys{grid, {}, Eigen::VectorXd(r), r, 2, cov, spline, Eigen::MatrixXd(spline.dim(), r), shift};
  for (int k = 0; k < r; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    double rho = rq[src];
    if (rho < 0.0) {
      if (rho < -1e-8 * rho_scale) throw NumericalError("eigen solve: negative eigenvalue " + std::to_string(rho));
      rho = 0.0;
    }
    Eigen::VectorXd b = coef_all.col(src);
    Eigen::VectorXd values = form.design * b;
    const double integral = grid.weights().dot(values);
    const double norm = std::sqrt(grid.weights().dot(values.cwiseProduct(values)));
    bool flip = false;
    if (std::abs(integral) > 1e-10 * std::max(norm, 1e-300)) {
      flip = integral < 0.0;
    } else {
      const double tiny = 1e-12 * b.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < b.size(); ++j) {
        if (std::abs(b[j]) > tiny) {
          flip = b[j] < 0.0;
          break;
        }
      }
    }
    if (flip) {
      b = -b;
      values = -values;
    }
    sys.rhos[k] = rho;
    sys.coefficients.col(k) = b;
    sys.basis.emplace_back(grid, std::move(values));
  }
  return sys;
}

}  // namespace

Eigen::MatrixXd EigenSystem::basis_matrix() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), r);
  for (int k = 0; k < r; ++k) out.col(k) = basis[static_cast<std::size_t>(k)].values();
  return out;
}

EigenSystem solve_eigen_scalar(const Curve2D& cov, int r, int galerkin_dim, int sobolev_order) {
  require(sobolev_order == 2, "solve_eigen_scalar: only Sobolev order m = 2 is supported");
  require(r >= 1, "solve_eigen_scalar: truncation r must be positive");
  require(r <= galerkin_dim - 2, "solve_eigen_scalar: r must be at most galerkin_dim - 2");
  const CubicBSplineBasis spline(galerkin_dim);
  const auto form = assemble_covariance_form(cov, spline);
  return solve_with_form(cov, spline, form, r, 0);
}

TensorEigenSystem solve_eigen_functional(const Curve2D& cov, int r, int galerkin_dim) {
  require(r >= 1, "solve_eigen_functional: truncation r must be positive");
  require(r <= galerkin_dim - 2, "solve_eigen_functional: r must be at most galerkin_dim - 2");
  const CubicBSplineBasis spline(galerkin_dim);
  const auto form = assemble_covariance_form(cov, spline);
  TensorEigenSystem out;
  out.r = r;
  const auto eta = cosine_basis(cov.grid_t(), static_cast<std::size_t>(r));
  out.cosine = eta.functions;
  for (int l = 1; l <= r; ++l) out.per_frequency.push_back(solve_with_form(cov, spline, form, r, l - 1));
  return out;
}

Eigen::MatrixXd gram_l2(const EigenSystem& sys) {
  const Eigen::MatrixXd b = sys.basis_matrix();
  Eigen::MatrixXd g = b.transpose() * sys.grid.weights().asDiagonal() * b;
  return 0.5 * (g + g.transpose());
}

int default_truncation(std::size_t n) { return std::max(1, std::min(20, static_cast<int>(n / 4))); }

void save_eigen_system(const EigenSystem& sys, const std::filesystem::path& prefix) {
  const auto base = prefix.string();
  write_scalars_csv(base + "_rho.csv", sys.rhos, "rho");
  write_curves_csv(base + "_basis.csv", sys.basis);
  write_curve2d_csv(base + "_cov.csv", sys.metric);
  nlohmann::ordered_json j;
  j["r"] = sys.r;
  j["sobolev_order"] = sys.sobolev_order;
  j["galerkin_dim"] = sys.spline.dim();
  j["frequency_shift"] = sys.frequency_shift;
  j["grid_points"] = sys.grid.size();
  auto coef = nlohmann::ordered_json::array();
  for (int k = 0; k < sys.r; ++k) {
    coef.push_back(std::vector<double>(sys.coefficients.col(k).data(),
                                       sys.coefficients.col(k).data() + sys.coefficients.rows()));
  }
  j["coefficients"] = coef;
  std::ofstream out(base + ".json");
  if (!out) throw ContractError("cannot write " + base + ".json");
  out << j.dump(2) << '\n';
}

EigenSystem load_eigen_system(const std::filesystem::path& prefix) {
  const auto base = prefix.string();
  std::ifstream in(base + ".json");
  if (!in) throw ContractError("cannot open " + base + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(base + ".json: " + e.what());
  }
  const int r = j.at("r").get<int>();
  const int dim = j.at("galerkin_dim").get<int>();
  const Curve2D cov = read_curve2d_csv(base + "_cov.csv");
  const Grid grid = cov.grid_s();
  const auto rhos = read_scalars_csv(base + "_rho.csv");
  require(rhos.size() == r, base + ": eigenvalue count does not match r");
  EigenSystem sys{grid, {}, rhos, r, j.at("sobolev_order").get<int>(), cov, CubicBSplineBasis(dim),
                  Eigen::MatrixXd(dim, r), j.at("frequency_shift").get<int>()};
  const auto coef = j.at("coefficients").get<std::vector<std::vector<double>>>();
  require(coef.size() == static_cast<std::size_t>(r), base + ": coefficient count does not match r");
  const Eigen::MatrixXd design = sys.spline.design(grid);
  for (int k = 0; k < r; ++k) {
    require(coef[static_cast<std::size_t>(k)].size() == static_cast<std::size_t>(dim), base + ": bad coefficient length");
    sys.coefficients.col(k) = Eigen::Map<const Eigen::VectorXd>(coef[static_cast<std::size_t>(k)].data(), dim);
    sys.basis.emplace_back(grid, design * sys.coefficients.col(k));
  }
  return sys;
}

}  // namespace relslope
