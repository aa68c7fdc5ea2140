#include "relslope/simharness.hpp"

#include "relslope/errors.hpp"
#include "relslope/rng.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

namespace relslope {

namespace {

constexpr std::uint64_t kPilotSeed = 0x9E3779B97F4A7C15ull;
constexpr int kPilotDraws = 10000;
const double kMaBound = 1.0 / std::numbers::sqrt2;

// Random streams of one sample; fixed so that every component is reproducible
// on its own.
enum Stream : std::uint64_t { kScores = 0, kTheta = 1, kXi = 2, kUpsilon = 3, kZeta = 4 };

/// Grid values of f_j / j as columns (j = 1..50).
Eigen::MatrixXd kl_loadings(const Grid& grid) {
  Eigen::MatrixXd L(static_cast<Eigen::Index>(grid.size()), kKarhunenLoeveTerms);
  for (int j = 1; j <= kKarhunenLoeveTerms; ++j) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      L(static_cast<Eigen::Index>(i), j - 1) = kl_function(j, grid.point(i)) / j;
    }
  }
  return L;
}

double s1_raw(double s) {
  double v = kl_function(1, s);
  for (int j = 2; j <= kKarhunenLoeveTerms; ++j) v += 4.0 * ((j % 2 == 0) ? -1.0 : 1.0) / (j * j) * kl_function(j, s);
  return v;
}

double f1_raw(double s, double t) {
  double v = 1.0;
  for (int j = 2; j <= kKarhunenLoeveTerms; ++j) {
    v += 4.0 * ((j % 2 == 0) ? -1.0 : 1.0) / (j * j) * kl_function(j, s) * kl_function(j, t);
  }
  return v;
}

/// ||beta_tilde||^2 = 1 + 16 sum_{j=2}^{50} j^{-4}, the same for S1 and F1.
double raw_norm_sq() {
  double v = 1.0;
  for (int j = 2; j <= kKarhunenLoeveTerms; ++j) v += 16.0 / std::pow(static_cast<double>(j), 4);
  return v;
}

/// MA(2) combination e_i = z_i + u_{i,1} z_{i-1} + u_{i,2} z_{i-2}; z has n+2 rows.
Eigen::MatrixXd moving_average(const Eigen::MatrixXd& z, std::size_t n, CounterRng& upsilon) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(n), z.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i + 2);
    const double u1 = upsilon.uniform(-kMaBound, kMaBound);
    const double u2 = upsilon.uniform(-kMaBound, kMaBound);
    e.row(static_cast<Eigen::Index>(i)) = z.row(k) + u1 * z.row(k - 1) + u2 * z.row(k - 2);
  }
  return e;
}

/// Unit-scale functional errors (c2 = 1) as rows on `grid`.
Eigen::MatrixXd unit_functional_errors(std::size_t n, const Grid& grid, std::uint64_t seed) {
  CounterRng zeta(seed, kZeta);
  CounterRng upsilon(seed, kUpsilon);
  const double sd = std::sqrt(1.0 / grid.spacing());
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n + 2), static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) z(i, k) = sd * zeta.normal();
  }
  return moving_average(z, n, upsilon);
}

double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

std::mutex g_pilot_mutex;
std::map<std::pair<int, std::size_t>, double> g_predictor_norm_var;
std::map<std::size_t, double> g_error_norm_var;

double predictor_norm_variance(PredictorKind kind, const Grid& grid) {
  const std::lock_guard lock(g_pilot_mutex);
  const auto key = std::make_pair(static_cast<int>(kind), grid.size());
  if (auto it = g_predictor_norm_var.find(key); it != g_predictor_norm_var.end()) return it->second;
  const auto X = gen_predictors(kind, kPilotDraws, grid, derive_seed(kPilotSeed, static_cast<std::uint64_t>(kind)));
  std::vector<double> norms;
  norms.reserve(X.size());
  for (const auto& x : X) norms.push_back(std::sqrt(norm_l2_sq(x)));
  const double v = sample_variance(norms);
  g_predictor_norm_var.emplace(key, v);
  return v;
}

double functional_error_norm_variance(const Grid& grid) {
  const std::lock_guard lock(g_pilot_mutex);
  if (auto it = g_error_norm_var.find(grid.size()); it != g_error_norm_var.end()) return it->second;
  const auto e = unit_functional_errors(kPilotDraws, grid, derive_seed(kPilotSeed, 99));
  std::vector<double> norms;
  norms.reserve(kPilotDraws);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    norms.push_back(std::sqrt(e.row(i).cwiseAbs2().dot(grid.weights().transpose())));
  }
  const double v = sample_variance(norms);
  g_error_norm_var.emplace(grid.size(), v);
  return v;
}

void check_options(const ExperimentOptions& opts, const QuantileTable& qtable) {
  require(opts.runs >= 50, "experiment: at least 50 runs required");
  require(opts.alpha > 0.0 && opts.alpha < 1.0, "experiment: alpha must lie in (0,1)");
  require(qtable.config.nu0 == opts.analysis.scheme.nu0() && qtable.config.Q == opts.analysis.scheme.count(),
          "experiment: quantile table was simulated for a different fraction scheme");
  require(qtable.has(1.0 - opts.alpha), "experiment: quantile table lacks level 1 - alpha");
}

void check_deltas(std::span<const double> deltas) {
  require(!deltas.empty(), "experiment: empty delta grid");
  for (double d : deltas) require(std::isfinite(d) && d >= 0.0, "experiment: deltas must be finite and nonnegative");
}

TestStatistics run_once(const DgpSpec& spec, const AnalysisOptions& opts) {
  const auto sample = gen_sample(spec);
  if (spec.functional()) return analyze_functional(sample.X, sample.Y, opts).stats;
  return analyze_scalar(sample.X, sample.y, opts).stats;
}

/// Runs `body(k)` for k = 0..runs-1, counting pipeline failures; throws once
/// they reach 1% of the runs.
template <class Body>
int run_all(int runs, Body&& body) {
  int failures = 0;
  for (int k = 0; k < runs; ++k) {
    try {
      body(k);
    } catch (const NumericalError&) {
      ++failures;
    }
  }
  if (100 * failures >= runs) {
    throw NumericalError("experiment: " + std::to_string(failures) + " of " + std::to_string(runs) +
                         " runs failed (limit: fewer than 1%)");
  }
  return failures;
}

ExperimentResult summarize(std::string label, std::span<const double> deltas, const std::vector<int>& rejections,
                           const std::vector<double>& Ts, int failures, const ExperimentOptions& opts,
                           const QuantileTable& qtable, double d0, std::uint64_t seed) {
  ExperimentResult r;
  r.label = std::move(label);
  r.deltas.assign(deltas.begin(), deltas.end());
  r.runs = static_cast<int>(Ts.size());
  r.failures = failures;
  r.d0 = d0;
  r.alpha = opts.alpha;
  r.seed = seed;
  r.scheme = opts.analysis.scheme;
  r.pivot = qtable.config;
  for (int count : rejections) {
    const double p = static_cast<double>(count) / r.runs;
    r.reject_prob.push_back(p);
    r.std_error.push_back(std::sqrt(p * (1.0 - p) / r.runs));
  }
  double mean = 0.0;
  for (double t : Ts) mean += t;
  mean /= r.runs;
  double acc = 0.0;
  for (double t : Ts) acc += (t - mean) * (t - mean);
  r.mean_T = mean;
  r.sd_T = r.runs > 1 ? std::sqrt(acc / (r.runs - 1)) : 0.0;
  return r;
}

}  // namespace

bool DgpSpec::functional() const {
  return slope == SlopeKind::F1 || slope == SlopeKind::F2 || slope == SlopeKind::zero_functional ||
         slope == SlopeKind::custom_functional;
}

void DgpSpec::validate() const {
  require(noise_ratio > 0.0 && std::isfinite(noise_ratio), "DgpSpec: noise_ratio must be positive");
  require(n >= 20, "DgpSpec: n must be at least 20");
  if (noise_scale) require(*noise_scale >= 0.0 && std::isfinite(*noise_scale), "DgpSpec: noise scale must be >= 0");
  if (slope == SlopeKind::custom_scalar) {
    require(custom_slope.has_value(), "DgpSpec: custom scalar slope missing");
    require(custom_slope->grid() == grid, "DgpSpec: custom slope is off the sample grid");
  }
  if (slope == SlopeKind::custom_functional) {
    require(custom_slope_2d.has_value(), "DgpSpec: custom functional slope missing");
    require(custom_slope_2d->grid_s() == grid && custom_slope_2d->grid_t() == grid,
            "DgpSpec: custom slope is off the sample grid");
  }
}

double kl_function(int j, double s) {
  return j == 1 ? 1.0 : std::numbers::sqrt2 * std::cos((j - 1) * std::numbers::pi * s);
}

Curve make_slope_scalar(const DgpSpec& spec) {
  switch (spec.slope) {
    case SlopeKind::S1: {
      const double scale = 1.0 / std::sqrt(raw_norm_sq());
      return Curve::from_function(spec.grid, [scale](double s) { return scale * s1_raw(s); });
    }
    case SlopeKind::S2:
      return Curve::from_function(spec.grid, [](double s) { return std::numbers::sqrt2 * std::exp(-s / 4.0); });
    case SlopeKind::zero_scalar:
      return Curve::constant(spec.grid, 0.0);
    case SlopeKind::custom_scalar:
      require(spec.custom_slope.has_value(), "make_slope: custom scalar slope missing");
      return *spec.custom_slope;
    default:
      throw ContractError("make_slope: " + to_string(spec.slope) + " is not a scalar-response slope");
  }
}

Curve2D make_slope_functional(const DgpSpec& spec) {
  switch (spec.slope) {
    case SlopeKind::F1: {
      const double scale = 1.0 / std::sqrt(raw_norm_sq());
      return Curve2D::from_function(spec.grid, spec.grid, [scale](double s, double t) { return scale * f1_raw(s, t); });
    }
    case SlopeKind::F2:
      return Curve2D::from_function(spec.grid, spec.grid, [](double s, double t) {
        return std::numbers::sqrt2 * std::exp(-(s + t) / 4.0);
      });
    case SlopeKind::zero_functional:
      return Curve2D(spec.grid, spec.grid, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.grid.size()),
                                                               static_cast<Eigen::Index>(spec.grid.size())));
    case SlopeKind::custom_functional:
      require(spec.custom_slope_2d.has_value(), "make_slope: custom functional slope missing");
      return *spec.custom_slope_2d;
    default:
      throw ContractError("make_slope: " + to_string(spec.slope) + " is not a function-on-function slope");
  }
}

double true_norm_sq(const DgpSpec& spec) {
  if (spec.functional()) {
    const auto b = make_slope_functional(spec);
    return inner_l2_2d(b, b);
  }
  return norm_l2_sq(make_slope_scalar(spec));
}

Curve2D iid_predictor_covariance(const Grid& grid) {
  const Eigen::MatrixXd L = kl_loadings(grid);
  return Curve2D(grid, grid, (7.0 / 6.0) * L * L.transpose());
}

std::vector<Curve> gen_predictors(PredictorKind kind, std::size_t n, const Grid& grid, std::uint64_t seed) {
  const Eigen::MatrixXd L = kl_loadings(grid);
  CounterRng scores(seed, kScores);
  CounterRng theta(seed, kTheta);
  // eta_0 .. eta_n as columns
  Eigen::MatrixXd Z(kKarhunenLoeveTerms, static_cast<Eigen::Index>(n + 1));
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    for (Eigen::Index j = 0; j < Z.rows(); ++j) Z(j, i) = scores.normal();
  }
  const Eigen::MatrixXd eta = L * Z;
  const double iid_scale = std::sqrt(7.0 / 6.0);
  std::vector<Curve> X;
  X.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    if (kind == PredictorKind::iid) {
      X.emplace_back(grid, iid_scale * eta.col(c));
    } else {
      const double th = theta.uniform(-kMaBound, kMaBound);
      X.emplace_back(grid, eta.col(c) + th * eta.col(c - 1));
    }
  }
  return X;
}

double calibrated_noise_scale(const DgpSpec& spec) {
  if (spec.noise_scale) return *spec.noise_scale;
  const double var_x = predictor_norm_variance(spec.predictor, spec.grid);
  if (spec.functional()) return std::sqrt(spec.noise_ratio * var_x / functional_error_norm_variance(spec.grid));
  // var(xi_i + u1 xi_{i-1} + u2 xi_{i-2}) = 1 + 2 E[u^2] = 4/3 for u ~ unif(-1/sqrt2, 1/sqrt2)
  return std::sqrt(spec.noise_ratio * var_x / (4.0 / 3.0));
}

Sample gen_sample(const DgpSpec& spec) {
  spec.validate();
  Sample out;
  out.X = gen_predictors(spec.predictor, spec.n, spec.grid, spec.seed);
  const double c = calibrated_noise_scale(spec);
  const Eigen::VectorXd& w = spec.grid.weights();
  if (spec.functional()) {
    const auto beta = make_slope_functional(spec);
    // Y_i(t) = int beta(s,t) X_i(s) ds + eps_i(t)
    const Eigen::MatrixXd kernel = beta.values().transpose() * w.asDiagonal();
    const Eigen::MatrixXd e = c * unit_functional_errors(spec.n, spec.grid, spec.seed);
    out.Y.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      out.Y.emplace_back(spec.grid, kernel * out.X[i].values() + e.row(static_cast<Eigen::Index>(i)).transpose());
    }
    return out;
  }
  const auto beta = make_slope_scalar(spec);
  CounterRng xi(spec.seed, kXi);
  CounterRng upsilon(spec.seed, kUpsilon);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(spec.n + 2), 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, 0) = xi.normal();
  const Eigen::MatrixXd e = moving_average(z, spec.n, upsilon);
  out.y.resize(static_cast<Eigen::Index>(spec.n));
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.y[k] = inner_l2(beta, out.X[i]) + c * e(k, 0);
  }
  return out;
}

ExperimentResult run_rejection_experiment(const DgpSpec& spec, std::span<const double> deltas,
                                          const ExperimentOptions& opts, const QuantileTable& qtable) {
  spec.validate();
  check_options(opts, qtable);
  check_deltas(deltas);
  const double q = qtable.at(1.0 - opts.alpha);
  std::vector<int> rejections(deltas.size(), 0);
  std::vector<double> Ts;
  const int failures = run_all(opts.runs, [&](int k) {
    DgpSpec run = spec;
    run.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(k));
    const auto stats = run_once(run, opts.analysis);
    Ts.push_back(stats.T);
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      if (stats.T > q * stats.V + deltas[d]) ++rejections[d];
    }
  });
  return summarize(to_string(spec.slope) + "/" + to_string(spec.predictor), deltas, rejections, Ts, failures, opts,
                   qtable, true_norm_sq(spec), spec.seed);
}

ExperimentResult run_two_sample_experiment(const DgpSpec& first, const DgpSpec& second,
                                           std::span<const double> deltas, const ExperimentOptions& opts,
                                           const QuantileTable& qtable) {
  first.validate();
  second.validate();
  require(!first.functional() && !second.functional(), "two-sample experiment: scalar-response settings required");
  require(first.grid == second.grid, "two-sample experiment: samples must share a grid");
  check_options(opts, qtable);
  check_deltas(deltas);
  const double q = qtable.at(1.0 - opts.alpha);
  std::vector<int> rejections(deltas.size(), 0);
  std::vector<double> Ts;
  const int failures = run_all(opts.runs, [&](int k) {
    DgpSpec a = first;
    DgpSpec b = second;
    // even/odd counters keep the samples independent even for equal seeds
    a.seed = derive_seed(first.seed, 2 * static_cast<std::uint64_t>(k));
    b.seed = derive_seed(second.seed, 2 * static_cast<std::uint64_t>(k) + 1);
    const auto sa = gen_sample(a);
    const auto sb = gen_sample(b);
    const auto stats = analyze_two_sample(sa.X, sa.y, sb.X, sb.y, opts.analysis).stats;
    Ts.push_back(stats.T);
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      if (stats.T > q * stats.V + deltas[d]) ++rejections[d];
    }
  });
  const double d0 = norm_l2_sq(make_slope_scalar(first) - make_slope_scalar(second));
  return summarize("two-sample " + to_string(first.slope) + "/" + to_string(first.predictor) + " vs " +
                       to_string(second.slope) + "/" + to_string(second.predictor),
                   deltas, rejections, Ts, failures, opts, qtable, d0, first.seed);
}

CoverageResult run_coverage_experiment(const DgpSpec& spec, const ExperimentOptions& opts,
                                       const QuantileTable& qtable) {
  spec.validate();
  check_options(opts, qtable);
  require(qtable.has(1.0 - opts.alpha / 2.0), "coverage experiment: quantile table lacks level 1 - alpha/2");
  const double d0 = true_norm_sq(spec);
  int one = 0;
  int two = 0;
  int done = 0;
  const int failures = run_all(opts.runs, [&](int k) {
    DgpSpec run = spec;
    run.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(k));
    const auto ci = confidence_intervals(run_once(run, opts.analysis), opts.alpha, qtable, true);
    ++done;
    if (d0 <= ci.one_sided.upper) ++one;
    if (ci.two_sided->lower < d0 && d0 <= ci.two_sided->upper) ++two;
  });
  CoverageResult r;
  r.runs = done;
  r.failures = failures;
  r.one_sided = static_cast<double>(one) / done;
  r.two_sided = static_cast<double>(two) / done;
  r.d0 = d0;
  r.alpha = opts.alpha;
  r.seed = spec.seed;
  return r;
}

nlohmann::ordered_json to_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["d0"] = r.d0;
  j["alpha"] = r.alpha;
  j["runs"] = r.runs;
  j["failures"] = r.failures;
  j["seed"] = r.seed;
  j["nu0"] = r.scheme.nu0();
  j["Q"] = r.scheme.count();
  j["pivot"] = {{"nu0", r.pivot.nu0},
                {"Q", r.pivot.Q},
                {"n_paths", r.pivot.n_paths},
                {"n_steps", r.pivot.n_steps},
                {"seed", r.pivot.seed}};
  j["mean_T"] = r.mean_T;
  j["sd_T"] = r.sd_T;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.deltas.size(); ++i) {
    rows.push_back({{"delta", r.deltas[i]}, {"p_reject", r.reject_prob[i]}, {"se", r.std_error[i]}});
  }
  j["rejection"] = rows;
  return j;
}

nlohmann::ordered_json to_json(const CoverageResult& r) {
  nlohmann::ordered_json j;
  j["d0"] = r.d0;
  j["alpha"] = r.alpha;
  j["runs"] = r.runs;
  j["failures"] = r.failures;
  j["seed"] = r.seed;
  j["coverage_one_sided"] = r.one_sided;
  j["coverage_two_sided"] = r.two_sided;
  return j;
}

void write_experiment_csv(const std::filesystem::path& path, const ExperimentResult& r) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  out << "delta,p_reject,se\n";
  for (std::size_t i = 0; i < r.deltas.size(); ++i) {
    out << format_double(r.deltas[i]) << ',' << format_double(r.reject_prob[i]) << ','
        << format_double(r.std_error[i]) << '\n';
  }
}

SlopeKind parse_slope(const std::string& name) {
  if (name == "S1") return SlopeKind::S1;
  if (name == "S2") return SlopeKind::S2;
  if (name == "F1") return SlopeKind::F1;
  if (name == "F2") return SlopeKind::F2;
  if (name == "zero") return SlopeKind::zero_scalar;
  if (name == "zero-f") return SlopeKind::zero_functional;
  throw ContractError("unknown slope setting '" + name + "' (expected S1, S2, F1, F2, zero or zero-f)");
}

PredictorKind parse_predictor(const std::string& name) {
  if (name == "fma1" || name == "i") return PredictorKind::fma1;
  if (name == "iid" || name == "ii") return PredictorKind::iid;
  throw ContractError("unknown predictor setting '" + name + "' (expected fma1 or iid)");
}

std::string to_string(SlopeKind kind) {
  switch (kind) {
    case SlopeKind::S1: return "S1";
    case SlopeKind::S2: return "S2";
    case SlopeKind::F1: return "F1";
    case SlopeKind::F2: return "F2";
    case SlopeKind::zero_scalar: return "zero";
    case SlopeKind::zero_functional: return "zero-f";
    case SlopeKind::custom_scalar: return "custom";
    case SlopeKind::custom_functional: return "custom-f";
  }
  return "unknown";
}

std::string to_string(PredictorKind kind) { return kind == PredictorKind::fma1 ? "fma1" : "iid"; }

}  // namespace relslope
