#include "cli.hpp"

#include "relslope/analysis.hpp"
#include "relslope/errors.hpp"
#include "relslope/funcspace.hpp"
#include "relslope/inference.hpp"
#include "relslope/pivotal.hpp"
#include "relslope/simharness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace relslope {

namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::size_t grid = 0;  // 0: taken from the CSV column count
  double nu0 = 0.5;
  int Q = 25;
  double alpha = 0.05;
  std::optional<double> delta;
  std::vector<double> sweep;
  std::string lambda = "gcv";
  int r = 0;
  int galerkin_dim = kDefaultGalerkinDim;
  int paths = 10000;
  int steps = 2048;
  std::uint64_t pivot_seed = kDefaultPivotSeed;
  std::string output;
  std::string format = "json";
  bool header = false;
  bool no_header = false;
};

// Validators run on the raw string before any computation starts.

std::optional<double> to_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

CLI::Validator open_unit() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        const auto v = to_number(s);
        return v && *v > 0.0 && *v < 1.0 ? "" : "value " + s + " must lie strictly between 0 and 1";
      },
      "(0,1)");
}

CLI::Validator nonnegative() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        const auto v = to_number(s);
        return v && *v >= 0.0 ? "" : "value " + s + " must be a nonnegative number";
      },
      ">=0");
}

CLI::Validator positive() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        const auto v = to_number(s);
        return v && *v > 0.0 ? "" : "value " + s + " must be a positive number";
      },
      ">0");
}

CLI::Validator lambda_spec() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        if (s == "gcv") return "";
        const auto v = to_number(s);
        return v && *v > 0.0 ? "" : "--lambda must be 'gcv' or a positive number, got " + s;
      },
      "gcv|LAMBDA");
}

void add_scheme(CLI::App* app, Options& o) {
  app->add_option("--nu0", o.nu0, "smallest sample fraction")->check(open_unit())->capture_default_str();
  app->add_option("--Q", o.Q, "number of sample fractions")->check(CLI::Range(1, 100000))->capture_default_str();
}

void add_pivot(CLI::App* app, Options& o) {
  app->add_option("--paths,--pivot-paths", o.paths, "Brownian paths for the pivotal quantiles")
      ->check(CLI::Range(1000, 100000000))
      ->capture_default_str();
  app->add_option("--steps,--pivot-steps", o.steps, "Brownian lattice steps")
      ->check(CLI::Range(512, 100000000))
      ->capture_default_str();
  app->add_option("--pivot-seed", o.pivot_seed, "seed of the pivotal simulation")->capture_default_str();
}

void add_estimation(CLI::App* app, Options& o) {
  add_scheme(app, o);
  app->add_option("--alpha", o.alpha, "nominal level")->check(open_unit())->capture_default_str();
  app->add_option("--lambda", o.lambda, "ridge parameter or 'gcv'")->check(lambda_spec())->capture_default_str();
  app->add_option("--r", o.r, "truncation (0: min(20, n/4))")->check(CLI::Range(0, 1000))->capture_default_str();
  app->add_option("--galerkin-dim", o.galerkin_dim, "cubic B-spline basis size")
      ->check(CLI::Range(8, 2000))
      ->capture_default_str();
  add_pivot(app, o);
  app->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "table"}))->capture_default_str();
  app->add_option("-o,--output", o.output, "write the report here instead of stdout");
}

void add_input(CLI::App* app, Options& o) {
  app->add_option("--grid", o.grid, "grid size the curve files must have")->check(CLI::Range(9, 1000000));
  auto* h = app->add_flag("--header", o.header, "first CSV row is a header");
  auto* nh = app->add_flag("--no-header", o.no_header, "first CSV row is data");
  h->excludes(nh);
}

void add_decision(CLI::App* app, Options& o) {
  auto* d = app->add_option("--delta", o.delta, "relevance threshold")->check(nonnegative());
  auto* s = app->add_option("--delta-sweep", o.sweep, "comma-separated thresholds, one decision each")
                ->delimiter(',')
                ->check(nonnegative());
  d->excludes(s);
}

CsvHeader header_mode(const Options& o) {
  if (o.header) return CsvHeader::present;
  if (o.no_header) return CsvHeader::absent;
  return CsvHeader::automatic;
}

std::vector<Curve> read_curves(const std::string& path, const Options& o) {
  std::optional<Grid> grid;
  if (o.grid > 0) grid = Grid(o.grid);
  return read_curves_csv(path, grid, header_mode(o));
}

AnalysisOptions analysis_options(const Options& o) {
  AnalysisOptions a;
  a.scheme = FractionScheme(o.nu0, o.Q);
  if (o.lambda != "gcv") a.lambda = std::stod(o.lambda);
  a.r = o.r;
  a.galerkin_dim = o.galerkin_dim;
  return a;
}

PivotalConfig pivot_config(const Options& o) {
  PivotalConfig c;
  c.nu0 = o.nu0;
  c.Q = o.Q;
  c.n_paths = o.paths;
  c.n_steps = o.steps;
  c.seed = o.pivot_seed;
  return c;
}

QuantileTable quantile_table(const PivotalConfig& config, std::span<const double> levels) {
  if (const char* dir = std::getenv(kCacheEnv); dir != nullptr && *dir != '\0') {
    return cached_table(config, levels, dir);
  }
  return quantiles(draw_pivotal(config), levels, config);
}

std::vector<double> requested_deltas(const Options& o) {
  if (!o.sweep.empty()) return o.sweep;
  return {*o.delta};
}

void emit(const std::string& text, const Options& o, std::ostream& out) {
  if (o.output.empty()) {
    out << text;
    return;
  }
  std::ofstream file(o.output);
  if (!file) throw ContractError("cannot write output file " + o.output);
  file << text;
}

struct Fitted {
  std::string problem;
  TestStatistics stats;
  double lambda = 0.0;
  std::optional<double> lambda_second;
  int r = 0;
  std::size_t n = 0;
  std::vector<std::string> inputs;
};

/// Decision report for every requested Delta plus intervals and provenance.
void report(const Fitted& f, const Options& o, std::ostream& out) {
  const auto deltas = requested_deltas(o);
  const auto config = pivot_config(o);
  const auto table = quantile_table(config, report_levels(o.alpha));

  auto rep = decide(f.stats, deltas.front(), o.alpha, table);
  rep.problem = f.problem;
  rep.lambda = f.lambda;
  rep.r = f.r;
  rep.scheme = FractionScheme(o.nu0, o.Q);
  rep.intervals = confidence_intervals(f.stats, o.alpha, table, true);

  if (o.format == "table") {
    std::string text = to_table(rep);
    if (deltas.size() > 1) {
      for (const double d : deltas) {
        text += "decision at delta " + format_double(d) + ": " +
                (decide(f.stats, d, o.alpha, table).reject ? "reject H0" : "do not reject H0") + "\n";
      }
    }
    emit(text, o, out);
    return;
  }

  Json j;
  j["version"] = kVersion;
  j["inputs"] = f.inputs;
  j["n"] = f.n;
  const auto fields = to_json(rep);
  for (const auto& [key, value] : fields.items()) j[key] = value;
  j["lambda_selection"] = o.lambda == "gcv" ? "gcv" : "fixed";
  if (f.lambda_second) j["lambda_second_sample"] = *f.lambda_second;
  if (deltas.size() > 1) {
    j.erase("delta");
    j.erase("reject");
    auto decisions = Json::array();
    for (const double d : deltas) decisions.push_back({{"delta", d}, {"reject", decide(f.stats, d, o.alpha, table).reject}});
    j["decisions"] = decisions;
  }
  emit(j.dump(2) + "\n", o, out);
}

Fitted fit_scalar(const std::string& xp, const std::string& yp, const Options& o) {
  const auto X = read_curves(xp, o);
  const auto Y = read_scalars_csv(yp);
  require(static_cast<std::size_t>(Y.size()) == X.size(),
          yp + ": " + std::to_string(Y.size()) + " responses for " + std::to_string(X.size()) + " curves in " + xp);
  const auto a = analyze_scalar(X, Y, analysis_options(o));
  return {"scalar-on-function", a.stats, a.fit.lambda, std::nullopt, a.sys.r, X.size(), {xp, yp}};
}

Fitted fit_functional(const std::string& xp, const std::string& yp, const Options& o) {
  const auto X = read_curves(xp, o);
  const auto Y = read_curves(yp, o);
  require(Y.size() == X.size(),
          yp + ": " + std::to_string(Y.size()) + " response curves for " + std::to_string(X.size()) + " in " + xp);
  const auto a = analyze_functional(X, Y, analysis_options(o));
  return {"function-on-function", a.stats, a.fit.lambda, std::nullopt, a.tsys.r, X.size(), {xp, yp}};
}

std::vector<double> parse_levels(const std::vector<double>& levels) {
  for (double l : levels) require(l > 0.0 && l < 1.0, "quantile levels must lie in (0,1)");
  return levels;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-normalized relevant-hypothesis tests for functional linear regression"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Options o;
  std::string x, y, x2, y2, beta;

  auto* scalar = app.add_subcommand("test-scalar", "scalar response: H0 ||beta||^2 <= delta");
  scalar->add_option("x", x, "predictor curves (CSV)")->required()->check(CLI::ExistingFile);
  scalar->add_option("y", y, "scalar responses (CSV)")->required()->check(CLI::ExistingFile);
  add_input(scalar, o);
  add_estimation(scalar, o);
  add_decision(scalar, o);

  auto* functional = app.add_subcommand("test-functional", "functional response: H0 ||beta||^2 <= delta");
  functional->add_option("x", x, "predictor curves (CSV)")->required()->check(CLI::ExistingFile);
  functional->add_option("y", y, "response curves (CSV)")->required()->check(CLI::ExistingFile);
  add_input(functional, o);
  add_estimation(functional, o);
  add_decision(functional, o);

  auto* two = app.add_subcommand("test-two-sample", "H0 ||beta_1 - beta_2||^2 <= delta");
  two->add_option("x1", x, "first-sample predictors")->required()->check(CLI::ExistingFile);
  two->add_option("y1", y, "first-sample responses")->required()->check(CLI::ExistingFile);
  two->add_option("x2", x2, "second-sample predictors")->required()->check(CLI::ExistingFile);
  two->add_option("y2", y2, "second-sample responses")->required()->check(CLI::ExistingFile);
  add_input(two, o);
  add_estimation(two, o);
  add_decision(two, o);

  auto* location = app.add_subcommand("test-location", "H0 ||beta - beta_star||^2 <= delta");
  location->add_option("x", x, "predictor curves (CSV)")->required()->check(CLI::ExistingFile);
  location->add_option("y", y, "scalar responses (CSV)")->required()->check(CLI::ExistingFile);
  location->add_option("beta_star", beta, "reference slope, one curve (CSV)")->required()->check(CLI::ExistingFile);
  add_input(location, o);
  add_estimation(location, o);
  add_decision(location, o);

  bool ci_functional = false;
  auto* ci = app.add_subcommand("ci", "confidence intervals for the squared slope norm");
  ci->add_option("x", x, "predictor curves (CSV)")->required()->check(CLI::ExistingFile);
  ci->add_option("y", y, "responses (CSV)")->required()->check(CLI::ExistingFile);
  ci->add_flag("--functional", ci_functional, "responses are curves");
  add_input(ci, o);
  add_estimation(ci, o);

  std::vector<double> levels = kDefaultLevels;
  auto* quant = app.add_subcommand("quantiles", "simulate quantiles of the pivotal distribution");
  add_scheme(quant, o);
  add_pivot(quant, o);
  quant->add_option("--seed", o.pivot_seed, "alias of --pivot-seed");
  quant->add_option("--levels", levels, "comma-separated levels")->delimiter(',')->check(open_unit());
  quant->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "table"}));
  quant->add_option("-o,--output", o.output, "write here instead of stdout");

  std::string slope = "S1", predictor = "iid", slope2, predictor2, mode = "rejection";
  std::size_t n = 200;
  int runs = 500;
  std::uint64_t seed = 1;
  double noise_ratio = 0.3;
  std::vector<double> deltas;
  std::size_t sim_grid = kDefaultGridPoints;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo rejection or coverage experiment");
  sim->add_option("--slope", slope, "S1, S2, F1, F2, zero or zero-f")->capture_default_str();
  sim->add_option("--predictor", predictor, "fma1 or iid")->capture_default_str();
  sim->add_option("--slope2", slope2, "second-sample slope (two-sample mode; default: --slope)");
  sim->add_option("--predictor2", predictor2, "second-sample predictor (default: --predictor)");
  sim->add_option("--mode", mode, "experiment kind")
      ->check(CLI::IsMember({"rejection", "coverage", "two-sample"}))
      ->capture_default_str();
  sim->add_option("--n", n, "sample size")->check(CLI::Range(std::size_t{20}, std::size_t{10000000}))->capture_default_str();
  sim->add_option("--runs", runs, "simulation runs")->check(CLI::Range(50, 100000000))->capture_default_str();
  sim->add_option("--seed", seed, "master seed of the experiment")->capture_default_str();
  sim->add_option("--noise-ratio", noise_ratio, "var(error) / var(||X||)")->check(positive())->capture_default_str();
  sim->add_option("--deltas", deltas, "comma-separated thresholds (default: d0 times 0.5..1.5)")
      ->delimiter(',')
      ->check(nonnegative());
  sim->add_option("--grid", sim_grid, "grid size")->check(CLI::Range(std::size_t{9}, std::size_t{1000000}))->capture_default_str();
  add_estimation(sim, o);

  std::size_t n_basis = 49;
  std::size_t proj_grid = kDefaultGridPoints;
  std::string raw;
  auto* project = app.add_subcommand("project", "Fourier-project raw equally spaced readings onto a grid");
  project->add_option("raw", raw, "one row of readings per curve (CSV)")->required()->check(CLI::ExistingFile);
  project->add_option("--basis", n_basis, "number of Fourier functions")->check(CLI::Range(std::size_t{1}, std::size_t{100000}))->capture_default_str();
  project->add_option("--grid", proj_grid, "output grid size")->check(CLI::Range(std::size_t{9}, std::size_t{1000000}))->capture_default_str();
  project->add_flag("--header", o.header, "first row is a header");
  project->add_option("-o,--output", o.output, "output curve CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if ((*scalar || *functional || *two || *location) && !o.delta && o.sweep.empty()) {
    err << "error: --delta or --delta-sweep is required\n";
    return kExitUsage;
  }

  if (*scalar) {
    report(fit_scalar(x, y, o), o, out);
  } else if (*functional) {
    report(fit_functional(x, y, o), o, out);
  } else if (*two) {
    const auto X1 = read_curves(x, o);
    const auto Y1 = read_scalars_csv(y);
    const auto X2 = read_curves(x2, o);
    const auto Y2 = read_scalars_csv(y2);
    require(static_cast<std::size_t>(Y1.size()) == X1.size(), y + ": response count differs from " + x);
    require(static_cast<std::size_t>(Y2.size()) == X2.size(), y2 + ": response count differs from " + x2);
    const auto a = analyze_two_sample(X1, Y1, X2, Y2, analysis_options(o));
    Fitted f{"two-sample", a.stats, a.first.fit.lambda, a.second.fit.lambda, a.first.sys.r, X1.size() + X2.size(),
             {x, y, x2, y2}};
    report(f, o, out);
  } else if (*location) {
    const auto X = read_curves(x, o);
    const auto Y = read_scalars_csv(y);
    require(static_cast<std::size_t>(Y.size()) == X.size(), y + ": response count differs from " + x);
    const auto star = read_curves_csv(beta, X.front().grid(), header_mode(o));
    require(star.size() == 1, beta + ": expected exactly one curve, found " + std::to_string(star.size()));
    const auto a = analyze_location(X, Y, star.front(), analysis_options(o));
    report({"location", a.stats, a.fit.lambda, std::nullopt, a.sys.r, X.size(), {x, y, beta}}, o, out);
  } else if (*ci) {
    const Fitted f = ci_functional ? fit_functional(x, y, o) : fit_scalar(x, y, o);
    const auto table = quantile_table(pivot_config(o), report_levels(o.alpha));
    const auto intervals = confidence_intervals(f.stats, o.alpha, table, true);
    Json j;
    j["version"] = kVersion;
    j["inputs"] = f.inputs;
    j["problem"] = f.problem;
    j["n"] = f.n;
    j["statistics"] = to_json(f.stats);
    j["alpha"] = o.alpha;
    j["one_sided"] = {{"lower", intervals.one_sided.lower}, {"upper", intervals.one_sided.upper}};
    j["two_sided"] = {{"lower", intervals.two_sided->lower}, {"upper", intervals.two_sided->upper}};
    j["largest_rejected_delta"] = largest_rejected_delta(f.stats, o.alpha, table);
    j["lambda"] = f.lambda;
    j["lambda_selection"] = o.lambda == "gcv" ? "gcv" : "fixed";
    j["r"] = f.r;
    j["nu0"] = o.nu0;
    j["Q"] = o.Q;
    j["pivot"] = {{"n_paths", o.paths}, {"n_steps", o.steps}, {"seed", o.pivot_seed}};
    if (o.format == "table") {
      emit("one-sided CI  [0, " + format_double(intervals.one_sided.upper) + "]\ntwo-sided CI  (" +
               format_double(intervals.two_sided->lower) + ", " + format_double(intervals.two_sided->upper) + "]\n",
           o, out);
    } else {
      emit(j.dump(2) + "\n", o, out);
    }
  } else if (*quant) {
    const auto config = pivot_config(o);
    const auto lv = parse_levels(levels);
    const auto table = quantile_table(config, lv);
    if (o.format == "table") {
      std::string text;
      for (const auto& [level, value] : table.quantiles) text += format_double(level) + "  " + format_double(value) + "\n";
      emit(text, o, out);
    } else {
      Json j;
      j["version"] = kVersion;
      j["nu0"] = config.nu0;
      j["Q"] = config.Q;
      j["n_paths"] = config.n_paths;
      j["n_steps"] = config.n_steps;
      j["seed"] = config.seed;
      auto rows = Json::array();
      for (const auto& [level, value] : table.quantiles) rows.push_back({{"level", level}, {"quantile", value}});
      j["quantiles"] = rows;
      emit(j.dump(2) + "\n", o, out);
    }
  } else if (*sim) {
    DgpSpec spec;
    spec.slope = parse_slope(slope);
    spec.predictor = parse_predictor(predictor);
    spec.n = n;
    spec.seed = seed;
    spec.noise_ratio = noise_ratio;
    spec.grid = Grid(sim_grid);
    ExperimentOptions eo;
    eo.analysis = analysis_options(o);
    eo.runs = runs;
    eo.alpha = o.alpha;
    const auto table = quantile_table(pivot_config(o), report_levels(o.alpha));
    Json j;
    j["version"] = kVersion;
    j["slope"] = slope;
    j["predictor"] = predictor;
    j["n"] = n;
    j["noise_ratio"] = noise_ratio;
    j["mode"] = mode;
    j["lambda_selection"] = o.lambda == "gcv" ? "gcv" : "fixed";
    if (mode == "coverage") {
      const auto fields = to_json(run_coverage_experiment(spec, eo, table));
      for (const auto& [key, value] : fields.items()) j[key] = value;
      if (!o.output.empty()) {
        std::ofstream file(o.output + ".json");
        if (!file) throw ContractError("cannot write " + o.output + ".json");
        file << j.dump(2) << '\n';
      }
      out << j.dump(2) << '\n';
      return kExitOk;
    }
    ExperimentResult result;
    if (mode == "two-sample") {
      DgpSpec second = spec;
      second.slope = parse_slope(slope2.empty() ? slope : slope2);
      second.predictor = parse_predictor(predictor2.empty() ? predictor : predictor2);
      if (deltas.empty()) deltas = {0.1, 0.2, 0.4};
      result = run_two_sample_experiment(spec, second, deltas, eo, table);
    } else {
      if (deltas.empty()) {
        const double d0 = true_norm_sq(spec);
        for (double m : {0.5, 0.75, 1.0, 1.25, 1.5}) deltas.push_back(m * d0);
      }
      result = run_rejection_experiment(spec, deltas, eo, table);
    }
    const auto fields = to_json(result);
    for (const auto& [key, value] : fields.items()) j[key] = value;
    if (!o.output.empty()) {
      write_experiment_csv(o.output + ".csv", result);
      std::ofstream file(o.output + ".json");
      if (!file) throw ContractError("cannot write " + o.output + ".json");
      file << j.dump(2) << '\n';
    }
    out << j.dump(2) << '\n';
  } else if (*project) {
    const auto rows = read_numeric_rows(raw, o.header);
    require(!rows.empty(), raw + ": no observations");
    const Grid grid(proj_grid);
    std::vector<Curve> curves;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto times = midpoint_times(rows[i].size());
      curves.push_back(fourier_project(times, rows[i], n_basis, grid));
    }
    write_curves_csv(o.output, curves);
    out << "wrote " << curves.size() << " curves on " << proj_grid << " grid points to " << o.output << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace relslope
