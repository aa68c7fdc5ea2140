#pragma once

// Self-normalized statistics T (squared L2 norm of the full-sample estimate)
// and V (weighted spread of the sequential norms), the relevant-hypothesis
// decision T > q_{1-alpha} V + Delta, and the matching confidence intervals.

#include "relslope/eigensys.hpp"
#include "relslope/estimator.hpp"
#include "relslope/pivotal.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace relslope {

struct TestStatistics {
  double T = 0.0;
  double V = 0.0;
  std::vector<double> norms;  // d_q, q = 1..Q
};

/// T = d_Q, V = { (1 - nu0)/Q sum_q nu_q^4 (d_q - d_Q)^2 }^{1/2}.
TestStatistics self_normalized(std::span<const double> norms, const FractionScheme& scheme);

TestStatistics stats_one_sample_scalar(const SequentialFit& fit);
TestStatistics stats_location(const SequentialFit& fit, const EigenSystem& sys, const Curve& beta_star);
TestStatistics stats_two_sample(const SequentialFit& fit1, const EigenSystem& sys1, const SequentialFit& fit2,
                                const EigenSystem& sys2);
TestStatistics stats_functional(const SequentialFitFunctional& fit);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct ConfidenceIntervals {
  Interval one_sided;                // [0, T + q_{1-alpha} V]
  std::optional<Interval> two_sided;  // (max{0, T - q_{1-alpha/2} V}, T + q_{1-alpha/2} V]
};

struct TestReport {
  std::string problem;
  TestStatistics statistics;
  double delta = 0.0;
  double alpha = 0.05;
  double quantile = 0.0;
  bool reject = false;
  double lambda = 0.0;
  int r = 0;
  FractionScheme scheme;
  PivotalConfig pivot;
  std::optional<ConfidenceIntervals> intervals;
  double largest_rejected_delta = 0.0;
};

/// Reject iff T > q_{1-alpha} V + delta.
TestReport decide(const TestStatistics& stats, double delta, double alpha, const QuantileTable& qtable);

ConfidenceIntervals confidence_intervals(const TestStatistics& stats, double alpha, const QuantileTable& qtable,
                                         bool two_sided = true);

/// max{0, T - q_{1-alpha} V}: every smaller Delta is rejected, no larger one is.
double largest_rejected_delta(const TestStatistics& stats, double alpha, const QuantileTable& qtable);

/// Levels needed for a report at `alpha`: 1 - alpha and 1 - alpha/2.
std::vector<double> report_levels(double alpha);

nlohmann::ordered_json to_json(const TestStatistics& stats);
nlohmann::ordered_json to_json(const TestReport& report);
/// Human-readable summary table.
std::string to_table(const TestReport& report);

}  // namespace relslope
