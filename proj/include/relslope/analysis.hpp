#pragma once

// End-to-end pipelines: covariance -> eigen-system -> lambda (GCV or fixed)
// -> sequential fits -> self-normalized statistics.

#include "relslope/eigensys.hpp"
#include "relslope/estimator.hpp"
#include "relslope/inference.hpp"

#include <optional>
#include <span>
#include <vector>

namespace relslope {

struct AnalysisOptions {
  FractionScheme scheme{0.5, 25};
  std::optional<double> lambda;     // nullopt: GCV
  int r = 0;                        // 0: default_truncation(n)
  int galerkin_dim = kDefaultGalerkinDim;
  std::vector<double> lambda_grid;  // empty: default_lambda_grid(n)
};

struct ScalarAnalysis {
  EigenSystem sys;
  SequentialFit fit;
  std::optional<GcvResult> gcv;
  TestStatistics stats;
};

struct FunctionalAnalysis {
  TensorEigenSystem tsys;
  SequentialFitFunctional fit;
  std::optional<GcvResult> gcv;
  TestStatistics stats;
};

struct TwoSampleAnalysis {
  ScalarAnalysis first;
  ScalarAnalysis second;
  TestStatistics stats;
};

ScalarAnalysis analyze_scalar(std::span<const Curve> X, const Eigen::VectorXd& Y, const AnalysisOptions& opts);

/// Location test against beta_star: statistics use ||beta_hat - beta_star||^2.
ScalarAnalysis analyze_location(std::span<const Curve> X, const Eigen::VectorXd& Y, const Curve& beta_star,
                                const AnalysisOptions& opts);

/// Each sample gets its own eigen-system and its own GCV lambda.
TwoSampleAnalysis analyze_two_sample(std::span<const Curve> X1, const Eigen::VectorXd& Y1,
                                     std::span<const Curve> X2, const Eigen::VectorXd& Y2,
                                     const AnalysisOptions& opts);

FunctionalAnalysis analyze_functional(std::span<const Curve> X, std::span<const Curve> Y,
                                      const AnalysisOptions& opts);

}  // namespace relslope
