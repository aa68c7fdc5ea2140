#include "relslope/estimator.hpp"

#include "relslope/errors.hpp"

#include <cmath>
#include <limits>

namespace relslope {

namespace {

// Cholesky when well conditioned, otherwise a spectral pseudo-inverse.
class SymmetricSolver {
 public:
  explicit SymmetricSolver(const Eigen::MatrixXd& a) {
    require(a.allFinite(), "normal equations: non-finite matrix");
    llt_.compute(a);
    if (llt_.info() == Eigen::Success && llt_.rcond() >= 1e-14) return;
    use_llt_ = false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev[i] > 1e-14 * top) inv[i] = 1.0 / ev[i];
    }
    pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    degenerate_ = top == 0.0;
  }

  template <typename Rhs>
  Eigen::MatrixXd solve(const Rhs& rhs) const {
    if (use_llt_) return llt_.solve(rhs);
    return pinv_ * rhs;
  }

  bool degenerate() const { return degenerate_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd pinv_;
  bool use_llt_ = true;
  bool degenerate_ = false;
};

// Cross-products of the leading n_q rows, accumulated block by block so that
// G_q only ever touches rows 1..n_q.
struct PrefixMoments {
  std::vector<std::size_t> sizes;
  std::vector<Eigen::MatrixXd> gram;
  std::vector<Eigen::VectorXd> cross;
};

PrefixMoments prefix_moments(const DesignScalar& d, const FractionScheme& scheme) {
  PrefixMoments m;
  m.sizes = scheme.sizes(d.n());
  const auto r = d.omega.cols();
  if (m.sizes.front() < static_cast<std::size_t>(r) + 1) {
    throw ContractError("first fraction uses " + std::to_string(m.sizes.front()) + " observations; at least r+1 = " +
                        std::to_string(r + 1) + " required");
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
  std::size_t done = 0;
  for (const std::size_t nq : m.sizes) {
    const auto start = static_cast<Eigen::Index>(done);
    const auto len = static_cast<Eigen::Index>(nq - done);
    if (len > 0) {
      const auto block = d.omega.middleRows(start, len);
      const auto yb = d.y.segment(start, len);
      g.noalias() += block.transpose() * block;
      c.noalias() += block.transpose() * yb;
    }
    done = nq;
    m.gram.push_back(g);
    m.cross.push_back(c);
  }
  return m;
}

void validate_design(const DesignScalar& d) {
  require(d.omega.rows() == d.y.size(), "design: Omega rows and Y length differ");
  require(d.omega.cols() == d.lambda_diag.size(), "design: Omega columns and Lambda size differ");
  require(d.omega.allFinite() && d.y.allFinite(), "design: non-finite entries");
  require((d.lambda_diag.array() >= 0.0).all(), "design: negative penalty eigenvalue");
}

Eigen::MatrixXd curve_rows(std::span<const Curve> curves, const Grid& grid, const char* what) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(curves.size()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    require(curves[i].grid() == grid, std::string(what) + ": curve " + std::to_string(i) + " is off the standard grid");
    out.row(static_cast<Eigen::Index>(i)) = curves[i].values().transpose();
  }
  return out;
}

struct GcvTerms {
  double residual = 0.0;
  double trace = 0.0;
};

// The residual is summed directly; expanding it through the prefix moments
// cancels catastrophically once the fit is nearly exact.
GcvTerms gcv_terms(const PrefixMoments& m, const DesignScalar& d, std::size_t qi, double lambda) {
  const auto nq = static_cast<Eigen::Index>(m.sizes[qi]);
  const Eigen::MatrixXd& g = m.gram[qi];
  Eigen::MatrixXd a = g;
  a.diagonal() += static_cast<double>(nq) * lambda * d.lambda_diag;
  const SymmetricSolver solver(a);
  const Eigen::VectorXd b = solver.solve(m.cross[qi]);
  const double rss = (d.y.head(nq) - d.omega.topRows(nq) * b).squaredNorm();
  return {rss, solver.solve(g).trace()};
}

GcvResult finish_gcv(std::span<const double> lambda_grid, std::vector<double> scores) {
  GcvResult out;
  out.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  out.scores = std::move(scores);
  std::size_t best = out.scores.size();
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (!std::isfinite(out.scores[i])) continue;
    if (best == out.scores.size() || out.scores[i] < out.scores[best]) best = i;
  }
  if (best == out.scores.size()) throw NumericalError("GCV: every lambda on the grid has an infinite score");
  out.lambda = out.lambda_grid[best];
  return out;
}

void validate_lambda_grid(std::span<const double> grid) {
  require(!grid.empty(), "GCV: empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]) && grid[i] >= 0.0, "GCV: lambda values must be finite and nonnegative");
    if (i > 0) require(grid[i] > grid[i - 1], "GCV: lambda grid must be strictly increasing");
  }
}

// Zero (infinite score) once the hat trace reaches n_q: past that point
// |1 - tr/n_q|^2 grows again and would reward interpolation. Only the
// functional score, whose trace sums over r blocks, can get there.
double denominator(double trace, double nq) {
  const double ratio = trace / nq;
  if (ratio > 1.0 - 1e-12) return 0.0;
  return (1.0 - ratio) * (1.0 - ratio);
}

}  // namespace

FractionScheme::FractionScheme(double nu0, int Q) : nu0_(nu0), Q_(Q) {
  require(nu0 > 0.0 && nu0 < 1.0, "FractionScheme: nu0 must lie in (0,1)");
  require(Q >= 1, "FractionScheme: Q must be positive");
}

double FractionScheme::fraction(int q) const {
  require(q >= 1 && q <= Q_, "FractionScheme: index out of range");
  if (q == Q_) return 1.0;
  return nu0_ + static_cast<double>(q) * (1.0 - nu0_) / static_cast<double>(Q_);
}

std::vector<double> FractionScheme::fractions() const {
  std::vector<double> out;
  for (int q = 1; q <= Q_; ++q) out.push_back(fraction(q));
  return out;
}

std::vector<std::size_t> FractionScheme::sizes(std::size_t n) const {
  std::vector<std::size_t> out;
  for (int q = 1; q <= Q_; ++q) {
    const double raw = static_cast<double>(n) * fraction(q);
    out.push_back(static_cast<std::size_t>(std::floor(raw + 1e-9)));
  }
  return out;
}

DesignScalar build_design_scalar(std::span<const Curve> X, const Eigen::VectorXd& Y, const EigenSystem& sys) {
  require(!X.empty(), "build_design_scalar: empty sample");
  require(X.size() == static_cast<std::size_t>(Y.size()), "build_design_scalar: X and Y sizes differ");
  require(Y.allFinite(), "build_design_scalar: non-finite response");
  const Eigen::MatrixXd xm = curve_rows(X, sys.grid, "build_design_scalar");
  DesignScalar d;
  d.omega = xm * sys.grid.weights().asDiagonal() * sys.basis_matrix();
  d.lambda_diag = sys.rhos;
  d.y = Y;
  return d;
}

DesignFunctional build_design_functional(std::span<const Curve> X, std::span<const Curve> Y,
                                         const TensorEigenSystem& tsys) {
  require(!X.empty(), "build_design_functional: empty sample");
  require(X.size() == Y.size(), "build_design_functional: X and Y sizes differ");
  const Grid& xgrid = tsys.per_frequency.front().grid;
  const Eigen::MatrixXd xw = curve_rows(X, xgrid, "build_design_functional") * xgrid.weights().asDiagonal();
  const Grid& ygrid = Y.front().grid();
  const Eigen::MatrixXd ym = curve_rows(Y, ygrid, "build_design_functional (response)");
  const BasisSet eta = cosine_basis(ygrid, static_cast<std::size_t>(tsys.r));

  DesignFunctional out;
  for (int l = 0; l < tsys.r; ++l) {
    const EigenSystem& sys = tsys.per_frequency[static_cast<std::size_t>(l)];
    DesignScalar d;
    d.omega = xw * sys.basis_matrix();
    d.lambda_diag = sys.rhos;
    d.y = ym * ygrid.weights().cwiseProduct(eta.functions[static_cast<std::size_t>(l)].values());
    out.blocks.push_back(std::move(d));
  }
  return out;
}

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                       const std::string& context) {
  const SymmetricSolver solver(A);
  if (solver.degenerate() && b.squaredNorm() > 0.0) {
    throw NumericalError(context + ": singular normal equations");
  }
  Eigen::VectorXd x = solver.solve(b);
  Eigen::VectorXd res = A * x - b;
  const double tol = 1e-8 * (1.0 + b.norm());
  if (res.norm() > tol) {
    x -= solver.solve(res);
    res = A * x - b;
  }
  if (!x.allFinite() || res.norm() > tol) throw NumericalError(context + ": singular normal equations");
  return x;
}

SequentialFit ridge_path_scalar(const DesignScalar& design, double lambda, const FractionScheme& scheme,
                                const Eigen::MatrixXd& gram) {
  validate_design(design);
  require(std::isfinite(lambda) && lambda > 0.0, "ridge_path_scalar: lambda must be positive");
  require(gram.rows() == design.omega.cols() && gram.cols() == design.omega.cols(),
          "ridge_path_scalar: Gram matrix size does not match r");
  const auto m = prefix_moments(design, scheme);
  SequentialFit fit{{}, lambda, scheme, gram};
  for (std::size_t qi = 0; qi < m.sizes.size(); ++qi) {
    Eigen::MatrixXd a = m.gram[qi];
    a.diagonal() += static_cast<double>(m.sizes[qi]) * lambda * design.lambda_diag;
    fit.coeffs.push_back(solve_normal_equations(a, m.cross[qi], "ridge fit at q=" + std::to_string(qi + 1)));
  }
  return fit;
}

SequentialFitFunctional ridge_path_functional(const DesignFunctional& designs, double lambda,
                                              const FractionScheme& scheme, std::vector<Eigen::MatrixXd> grams) {
  require(!designs.blocks.empty(), "ridge_path_functional: no frequency blocks");
  require(grams.size() == designs.blocks.size(), "ridge_path_functional: one Gram matrix per frequency required");
  SequentialFitFunctional out{std::vector<std::vector<Eigen::VectorXd>>(static_cast<std::size_t>(scheme.count())),
                              lambda, scheme, std::move(grams)};
  for (std::size_t l = 0; l < designs.blocks.size(); ++l) {
    const auto block = ridge_path_scalar(designs.blocks[l], lambda, scheme, out.grams[l]);
    for (std::size_t qi = 0; qi < block.coeffs.size(); ++qi) out.coeffs[qi].push_back(block.coeffs[qi]);
  }
  return out;
}

GcvResult gcv_select_scalar(const DesignScalar& design, const FractionScheme& scheme,
                            std::span<const double> lambda_grid) {
  validate_design(design);
  validate_lambda_grid(lambda_grid);
  const auto m = prefix_moments(design, scheme);
  std::vector<double> scores;
  for (const double lambda : lambda_grid) {
    double score = 0.0;
    for (std::size_t qi = 0; qi < m.sizes.size() && std::isfinite(score); ++qi) {
      const auto nq = static_cast<double>(m.sizes[qi]);
      const auto t = gcv_terms(m, design, qi, lambda);
      const double den = denominator(t.trace, nq);
      score = den == 0.0 ? std::numeric_limits<double>::infinity() : score + (t.residual / nq) / den;
    }
    scores.push_back(score);
  }
  return finish_gcv(lambda_grid, std::move(scores));
}

GcvResult gcv_select_functional(const DesignFunctional& designs, const FractionScheme& scheme,
                                std::span<const double> lambda_grid) {
  require(!designs.blocks.empty(), "gcv_select_functional: no frequency blocks");
  validate_lambda_grid(lambda_grid);
  std::vector<PrefixMoments> moments;
  for (const auto& b : designs.blocks) {
    validate_design(b);
    moments.push_back(prefix_moments(b, scheme));
  }
  const auto& sizes = moments.front().sizes;
  std::vector<double> scores;
  for (const double lambda : lambda_grid) {
    double score = 0.0;
    for (std::size_t qi = 0; qi < sizes.size() && std::isfinite(score); ++qi) {
      const auto nq = static_cast<double>(sizes[qi]);
      double rss = 0.0;
      double trace = 0.0;
      for (std::size_t l = 0; l < moments.size(); ++l) {
        const auto t = gcv_terms(moments[l], designs.blocks[l], qi, lambda);
        rss += t.residual;
        trace += t.trace;
      }
      const double den = denominator(trace, nq);
      score = den == 0.0 ? std::numeric_limits<double>::infinity() : score + (rss / nq) / den;
    }
    scores.push_back(score);
  }
  return finish_gcv(lambda_grid, std::move(scores));
}

std::vector<double> default_lambda_grid(std::size_t n) {
  require(n > 0, "default_lambda_grid: n must be positive");
  constexpr int kPoints = 30;
  std::vector<double> grid;
  for (int i = 0; i < kPoints; ++i) {
    const double exponent = -8.0 + 10.0 * static_cast<double>(i) / (kPoints - 1);
    grid.push_back(std::pow(10.0, exponent) / static_cast<double>(n));
  }
  return grid;
}

Curve evaluate_estimate(const SequentialFit& fit, const EigenSystem& sys, int q) {
  require(q >= 1 && q <= static_cast<int>(fit.coeffs.size()), "evaluate_estimate: fraction index out of range");
  const auto& b = fit.coeffs[static_cast<std::size_t>(q - 1)];
  require(b.size() == sys.r, "evaluate_estimate: coefficient length does not match r");
  return Curve(sys.grid, sys.basis_matrix() * b);
}

Curve2D evaluate_estimate(const SequentialFitFunctional& fit, const TensorEigenSystem& tsys, int q) {
  require(q >= 1 && q <= static_cast<int>(fit.coeffs.size()), "evaluate_estimate: fraction index out of range");
  const auto& blocks = fit.coeffs[static_cast<std::size_t>(q - 1)];
  require(blocks.size() == tsys.per_frequency.size(), "evaluate_estimate: frequency count mismatch");
  const Grid& gs = tsys.per_frequency.front().grid;
  const Grid& gt = tsys.cosine.front().grid();
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gs.size()), static_cast<Eigen::Index>(gt.size()));
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const Eigen::VectorXd x = tsys.per_frequency[l].basis_matrix() * blocks[l];
    values.noalias() += x * tsys.cosine[l].values().transpose();
  }
  return Curve2D(gs, gt, std::move(values));
}

}  // namespace relslope
