#include "relslope/analysis.hpp"

#include "relslope/errors.hpp"

namespace relslope {

namespace {

int resolve_truncation(std::size_t n, const AnalysisOptions& opts) {
  const int r = opts.r > 0 ? opts.r : default_truncation(n);
  const auto n1 = opts.scheme.sizes(n).front();
  if (n1 < static_cast<std::size_t>(r) + 1) {
    throw ContractError("sample of size " + std::to_string(n) + " leaves " + std::to_string(n1) +
                        " observations for the first fraction; need at least r+1 = " + std::to_string(r + 1));
  }
  return r;
}

std::vector<double> resolve_grid(std::size_t n, const AnalysisOptions& opts) {
  return opts.lambda_grid.empty() ? default_lambda_grid(n) : opts.lambda_grid;
}

}  // namespace

ScalarAnalysis analyze_scalar(std::span<const Curve> X, const Eigen::VectorXd& Y, const AnalysisOptions& opts) {
  require(!X.empty(), "analyze_scalar: empty sample");
  const int r = resolve_truncation(X.size(), opts);
  auto sys = solve_eigen_scalar(empirical_covariance(X), r, opts.galerkin_dim);
  const auto design = build_design_scalar(X, Y, sys);
  std::optional<GcvResult> gcv;
  double lambda = 0.0;
  if (opts.lambda) {
    lambda = *opts.lambda;
  } else {
    const auto grid = resolve_grid(X.size(), opts);
    gcv = gcv_select_scalar(design, opts.scheme, grid);
    lambda = gcv->lambda;
  }
  auto fit = ridge_path_scalar(design, lambda, opts.scheme, gram_l2(sys));
  auto stats = stats_one_sample_scalar(fit);
  return {std::move(sys), std::move(fit), std::move(gcv), std::move(stats)};
}

ScalarAnalysis analyze_location(std::span<const Curve> X, const Eigen::VectorXd& Y, const Curve& beta_star,
                                const AnalysisOptions& opts) {
  auto out = analyze_scalar(X, Y, opts);
  out.stats = stats_location(out.fit, out.sys, beta_star);
  return out;
}

TwoSampleAnalysis analyze_two_sample(std::span<const Curve> X1, const Eigen::VectorXd& Y1,
                                     std::span<const Curve> X2, const Eigen::VectorXd& Y2,
                                     const AnalysisOptions& opts) {
  auto first = analyze_scalar(X1, Y1, opts);
  auto second = analyze_scalar(X2, Y2, opts);
  auto stats = stats_two_sample(first.fit, first.sys, second.fit, second.sys);
  return {std::move(first), std::move(second), std::move(stats)};
}

FunctionalAnalysis analyze_functional(std::span<const Curve> X, std::span<const Curve> Y,
                                      const AnalysisOptions& opts) {
  require(!X.empty(), "analyze_functional: empty sample");
  const int r = resolve_truncation(X.size(), opts);
  auto tsys = solve_eigen_functional(empirical_covariance(X), r, opts.galerkin_dim);
  const auto designs = build_design_functional(X, Y, tsys);
  std::optional<GcvResult> gcv;
  double lambda = 0.0;
  if (opts.lambda) {
    lambda = *opts.lambda;
  } else {
    gcv = gcv_select_functional(designs, opts.scheme, resolve_grid(X.size(), opts));
    lambda = gcv->lambda;
  }
  std::vector<Eigen::MatrixXd> grams;
  for (const auto& sys : tsys.per_frequency) grams.push_back(gram_l2(sys));
  auto fit = ridge_path_functional(designs, lambda, opts.scheme, std::move(grams));
  auto stats = stats_functional(fit);
  return {std::move(tsys), std::move(fit), std::move(gcv), std::move(stats)};
}

}  // namespace relslope
