#include "relslope/inference.hpp"

#include "relslope/errors.hpp"

#include <cmath>
#include <sstream>

namespace relslope {

namespace {

double quadratic(const Eigen::VectorXd& b, const Eigen::MatrixXd& gram) { return b.dot(gram * b); }

void check_alpha(double alpha) { require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)"); }

nlohmann::ordered_json interval_json(const Interval& iv) { return {{"lower", iv.lower}, {"upper", iv.upper}}; }

}  // namespace

TestStatistics self_normalized(std::span<const double> norms, const FractionScheme& scheme) {
  require(norms.size() == static_cast<std::size_t>(scheme.count()), "self_normalized: one norm per fraction required");
  TestStatistics s;
  s.norms.assign(norms.begin(), norms.end());
  s.T = norms.back();
  double acc = 0.0;
  for (int q = 1; q <= scheme.count(); ++q) {
    const double nu = scheme.fraction(q);
    const double diff = norms[static_cast<std::size_t>(q - 1)] - s.T;
    acc += nu * nu * nu * nu * diff * diff;
  }
  s.V = std::sqrt((1.0 - scheme.nu0()) / scheme.count() * acc);
  return s;
}

TestStatistics stats_one_sample_scalar(const SequentialFit& fit) {
  std::vector<double> d;
  for (const auto& b : fit.coeffs) d.push_back(quadratic(b, fit.gram));
  return self_normalized(d, fit.scheme);
}

TestStatistics stats_location(const SequentialFit& fit, const EigenSystem& sys, const Curve& beta_star) {
  require(beta_star.grid() == sys.grid, "stats_location: beta_star is off the estimation grid");
  std::vector<double> d;
  for (int q = 1; q <= fit.scheme.count(); ++q) d.push_back(norm_l2_sq(evaluate_estimate(fit, sys, q) - beta_star));
  return self_normalized(d, fit.scheme);
}

TestStatistics stats_two_sample(const SequentialFit& fit1, const EigenSystem& sys1, const SequentialFit& fit2,
                                const EigenSystem& sys2) {
  if (!(fit1.scheme == fit2.scheme)) throw ContractError("stats_two_sample: samples use different fraction schemes");
  require(sys1.grid == sys2.grid, "stats_two_sample: eigen-systems live on different grids");
  std::vector<double> d;
  for (int q = 1; q <= fit1.scheme.count(); ++q)
    d.push_back(norm_l2_sq(evaluate_estimate(fit1, sys1, q) - evaluate_estimate(fit2, sys2, q)));
  return self_normalized(d, fit1.scheme);
}

TestStatistics stats_functional(const SequentialFitFunctional& fit) {
  std::vector<double> d;
  for (const auto& blocks : fit.coeffs) {
    require(blocks.size() == fit.grams.size(), "stats_functional: one Gram matrix per frequency required");
    double sum = 0.0;
    for (std::size_t l = 0; l < blocks.size(); ++l) sum += quadratic(blocks[l], fit.grams[l]);
    d.push_back(sum);
  }
  return self_normalized(d, fit.scheme);
}

std::vector<double> report_levels(double alpha) {
  check_alpha(alpha);
  return {1.0 - alpha, 1.0 - alpha / 2.0};
}

TestReport decide(const TestStatistics& stats, double delta, double alpha, const QuantileTable& qtable) {
  require(std::isfinite(delta) && delta >= 0.0, "decide: delta must be nonnegative");
  check_alpha(alpha);
  TestReport report;
  report.statistics = stats;
  report.delta = delta;
  report.alpha = alpha;
  report.quantile = qtable.at(1.0 - alpha);
  report.reject = stats.T > report.quantile * stats.V + delta;
  report.pivot = qtable.config;
  report.largest_rejected_delta = std::max(0.0, stats.T - report.quantile * stats.V);
  return report;
}

ConfidenceIntervals confidence_intervals(const TestStatistics& stats, double alpha, const QuantileTable& qtable,
                                         bool two_sided) {
  check_alpha(alpha);
  ConfidenceIntervals ci;
  ci.one_sided = {0.0, stats.T + qtable.at(1.0 - alpha) * stats.V};
  if (two_sided) {
    const double q2 = qtable.at(1.0 - alpha / 2.0);
    ci.two_sided = Interval{std::max(0.0, stats.T - q2 * stats.V), stats.T + q2 * stats.V};
  }
  return ci;
}

double largest_rejected_delta(const TestStatistics& stats, double alpha, const QuantileTable& qtable) {
  check_alpha(alpha);
  return std::max(0.0, stats.T - qtable.at(1.0 - alpha) * stats.V);
}

nlohmann::ordered_json to_json(const TestStatistics& stats) {
  nlohmann::ordered_json j;
  j["T"] = stats.T;
  j["V"] = stats.V;
  j["fraction_norms"] = stats.norms;
  return j;
}

nlohmann::ordered_json to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["problem"] = r.problem;
  j["statistics"] = to_json(r.statistics);
  j["delta"] = r.delta;
  j["alpha"] = r.alpha;
  j["quantile"] = r.quantile;
  j["reject"] = r.reject;
  j["largest_rejected_delta"] = r.largest_rejected_delta;
  if (r.intervals) {
    nlohmann::ordered_json ci;
    ci["one_sided"] = interval_json(r.intervals->one_sided);
    if (r.intervals->two_sided) ci["two_sided"] = interval_json(*r.intervals->two_sided);
    j["confidence_intervals"] = ci;
  }
  j["lambda"] = r.lambda;
  j["r"] = r.r;
  j["nu0"] = r.scheme.nu0();
  j["Q"] = r.scheme.count();
  j["pivot"] = {{"nu0", r.pivot.nu0},
                {"Q", r.pivot.Q},
                {"n_paths", r.pivot.n_paths},
                {"n_steps", r.pivot.n_steps},
                {"seed", r.pivot.seed}};
  return j;
}

std::string to_table(const TestReport& r) {
  std::ostringstream out;
  out << "problem              " << r.problem << '\n'
      << "T                    " << format_double(r.statistics.T) << '\n'
      << "V                    " << format_double(r.statistics.V) << '\n'
      << "delta                " << format_double(r.delta) << '\n'
      << "alpha                " << format_double(r.alpha) << '\n'
      << "quantile (1-alpha)   " << format_double(r.quantile) << '\n'
      << "threshold q*V+delta  " << format_double(r.quantile * r.statistics.V + r.delta) << '\n'
      << "decision             " << (r.reject ? "reject H0" : "do not reject H0") << '\n'
      << "largest rejected Δ   " << format_double(r.largest_rejected_delta) << '\n';
  if (r.intervals) {
    out << "one-sided CI         [0, " << format_double(r.intervals->one_sided.upper) << "]\n";
    if (r.intervals->two_sided) {
      out << "two-sided CI         (" << format_double(r.intervals->two_sided->lower) << ", "
          << format_double(r.intervals->two_sided->upper) << "]\n";
    }
  }
  out << "lambda               " << format_double(r.lambda) << '\n'
      << "r                    " << r.r << '\n'
      << "nu0, Q               " << format_double(r.scheme.nu0()) << ", " << r.scheme.count() << '\n'
      << "pivot seed           " << r.pivot.seed << '\n';
  return out.str();
}

}  // namespace relslope
