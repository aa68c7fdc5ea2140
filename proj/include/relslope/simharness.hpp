#pragma once

// Data-generating processes for scalar- and function-on-function regression
// with dependent predictors and errors, and Monte-Carlo rejection / coverage
// experiments over the full testing pipeline.

#include "relslope/analysis.hpp"
#include "relslope/funcspace.hpp"
#include "relslope/pivotal.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace relslope {

enum class SlopeKind { S1, S2, F1, F2, zero_scalar, zero_functional, custom_scalar, custom_functional };
enum class PredictorKind { fma1, iid };

inline constexpr int kKarhunenLoeveTerms = 50;

struct DgpSpec {
  SlopeKind slope = SlopeKind::S1;
  PredictorKind predictor = PredictorKind::iid;
  std::size_t n = 200;
  double noise_ratio = 0.3;
  std::uint64_t seed = 1;
  Grid grid{};
  std::optional<Curve> custom_slope;
  std::optional<Curve2D> custom_slope_2d;
  /// Overrides the calibrated error scale c1 (scalar) or c2 (functional).
  std::optional<double> noise_scale;

  bool functional() const;
  void validate() const;
};

struct Sample {
  std::vector<Curve> X;
  Eigen::VectorXd y;        // scalar response
  std::vector<Curve> Y;     // functional response
};

/// f_1 = 1, f_{j+1}(s) = sqrt(2) cos(j pi s).
double kl_function(int j, double s);

Curve make_slope_scalar(const DgpSpec& spec);
Curve2D make_slope_functional(const DgpSpec& spec);
/// Squared L2 norm of the slope by quadrature.
double true_norm_sq(const DgpSpec& spec);

/// Analytic covariance of the iid predictor: sum_j (7/6) j^{-2} f_j(s) f_j(t).
Curve2D iid_predictor_covariance(const Grid& grid);

/// Predictors X_1..X_n only.
std::vector<Curve> gen_predictors(PredictorKind kind, std::size_t n, const Grid& grid, std::uint64_t seed);

Sample gen_sample(const DgpSpec& spec);

/// Error scale such that the noise-to-predictor variance ratio equals
/// spec.noise_ratio (pilot of 1e4 draws, memoized per predictor and grid).
double calibrated_noise_scale(const DgpSpec& spec);

struct ExperimentResult {
  std::string label;
  std::vector<double> deltas;
  std::vector<double> reject_prob;
  std::vector<double> std_error;
  int runs = 0;
  int failures = 0;
  double d0 = 0.0;
  double mean_T = 0.0;
  double sd_T = 0.0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  FractionScheme scheme;
  PivotalConfig pivot;
};

struct CoverageResult {
  double one_sided = 0.0;
  double two_sided = 0.0;
  int runs = 0;
  int failures = 0;
  double d0 = 0.0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct ExperimentOptions {
  AnalysisOptions analysis{};
  int runs = 500;
  double alpha = 0.05;
};

/// Rejection frequency of the full pipeline for every Delta; all Deltas share
/// the same simulated samples, run seeds derived from spec.seed by counter.
ExperimentResult run_rejection_experiment(const DgpSpec& spec, std::span<const double> deltas,
                                          const ExperimentOptions& opts, const QuantileTable& qtable);

/// Two independent samples, streams derived from each DgpSpec seed.
ExperimentResult run_two_sample_experiment(const DgpSpec& first, const DgpSpec& second,
                                           std::span<const double> deltas, const ExperimentOptions& opts,
                                           const QuantileTable& qtable);

CoverageResult run_coverage_experiment(const DgpSpec& spec, const ExperimentOptions& opts,
                                       const QuantileTable& qtable);

nlohmann::ordered_json to_json(const ExperimentResult& result);
nlohmann::ordered_json to_json(const CoverageResult& result);
void write_experiment_csv(const std::filesystem::path& path, const ExperimentResult& result);

SlopeKind parse_slope(const std::string& name);
PredictorKind parse_predictor(const std::string& name);
std::string to_string(SlopeKind kind);
std::string to_string(PredictorKind kind);

}  // namespace relslope
