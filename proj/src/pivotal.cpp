#include "relslope/pivotal.hpp"

#include "relslope/errors.hpp"
#include "relslope/funcspace.hpp"
#include "relslope/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace relslope {

namespace {

std::atomic<std::uint64_t> g_simulations{0};
std::atomic<std::uint64_t> g_redrawn{0};

constexpr double kLevelTolerance = 1e-12;

}  // namespace

void PivotalConfig::validate() const {
  require(nu0 > 0.0 && nu0 < 1.0, "pivotal: nu0 must lie in (0,1)");
  require(Q >= 1, "pivotal: Q must be positive");
  require(n_paths >= 1000, "pivotal: at least 1000 paths required");
  require(n_steps >= 512, "pivotal: at least 512 Brownian steps required");
}

double QuantileTable::at(double level) const {
  for (const auto& [lv, value] : quantiles) {
    if (std::abs(lv - level) <= kLevelTolerance) return value;
  }
  throw ContractError("quantile table has no level " + format_double(level));
}

bool QuantileTable::has(double level) const {
  return std::any_of(quantiles.begin(), quantiles.end(),
                     [&](const auto& kv) { return std::abs(kv.first - level) <= kLevelTolerance; });
}

std::vector<int> lattice_indices(const PivotalConfig& config) {
  std::vector<int> idx;
  for (int q = 1; q <= config.Q; ++q) {
    if (q == config.Q) {
      idx.push_back(config.n_steps);
      break;
    }
    const double nu = config.nu0 + static_cast<double>(q) * (1.0 - config.nu0) / config.Q;
    idx.push_back(static_cast<int>(std::floor(nu * config.n_steps + 1e-9)));
  }
  return idx;
}

double pivotal_ratio(const PivotalConfig& config, std::span<const double> b) {
  const auto idx = lattice_indices(config);
  require(b.size() == idx.size(), "pivotal_ratio: one Brownian value per lattice point required");
  const double b1 = b.back();
  double acc = 0.0;
  for (std::size_t q = 0; q < idx.size(); ++q) {
    const double nu = q + 1 == idx.size()
                          ? 1.0
                          : config.nu0 + static_cast<double>(q + 1) * (1.0 - config.nu0) / config.Q;
    const double dev = nu * b[q] - nu * nu * b1;
    acc += dev * dev;
  }
  const double denom = std::sqrt((1.0 - config.nu0) / config.Q * acc);
  if (denom < 1e-300) return std::numeric_limits<double>::quiet_NaN();
  return b1 / denom;
}

std::vector<double> draw_pivotal(const PivotalConfig& config) {
  config.validate();
  ++g_simulations;
  const auto idx = lattice_indices(config);
  std::vector<double> draws(static_cast<std::size_t>(config.n_paths));
  std::vector<double> b(idx.size());
  const double dt = 1.0 / config.n_steps;
  for (int p = 0; p < config.n_paths; ++p) {
    CounterRng rng(config.seed, static_cast<std::uint64_t>(p));
    for (;;) {
      int prev = 0;
      double level = 0.0;
      for (std::size_t q = 0; q < idx.size(); ++q) {
        const int gap = idx[q] - prev;
        if (gap > 0) level += std::sqrt(gap * dt) * rng.normal();
        b[q] = level;
        prev = idx[q];
      }
      const double w = pivotal_ratio(config, b);
      if (std::isfinite(w)) {
        draws[static_cast<std::size_t>(p)] = w;
        break;
      }
      ++g_redrawn;
    }
  }
  return draws;
}

double empirical_quantile(std::span<const double> sorted, double level) {
  require(!sorted.empty(), "empirical_quantile: no draws");
  require(level > 0.0 && level < 1.0, "empirical_quantile: level must lie in (0,1)");
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(level * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

QuantileTable quantiles(std::span<const double> draws, std::span<const double> levels,
                        const PivotalConfig& config, bool keep_draws) {
  require(!draws.empty(), "quantiles: no draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  QuantileTable table{config, {}, {}};
  for (const double level : levels) table.quantiles[level] = empirical_quantile(sorted, level);
  if (keep_draws) table.draws = std::move(sorted);
  return table;
}

std::uint64_t simulation_count() { return g_simulations.load(); }
std::uint64_t redrawn_paths() { return g_redrawn.load(); }

std::filesystem::path cache_file(const PivotalConfig& c, const std::filesystem::path& cache_dir) {
  std::ostringstream name;
  name << "pivotal_nu" << format_double(c.nu0) << "_Q" << c.Q << "_p" << c.n_paths << "_s" << c.n_steps << "_seed"
       << c.seed << ".json";
  return cache_dir / name.str();
}

namespace {

std::vector<double> load_cached_draws(const std::filesystem::path& file, const PivotalConfig& c) {
  std::ifstream in(file);
  if (!in) return {};
  try {
    const auto j = nlohmann::json::parse(in);
    const bool same = j.at("nu0").get<double>() == c.nu0 && j.at("Q").get<int>() == c.Q &&
                      j.at("n_paths").get<int>() == c.n_paths && j.at("n_steps").get<int>() == c.n_steps &&
                      j.at("seed").get<std::uint64_t>() == c.seed;
    auto draws = j.at("sorted_draws").get<std::vector<double>>();
    if (!same || draws.size() != static_cast<std::size_t>(c.n_paths) || !std::is_sorted(draws.begin(), draws.end())) {
      throw std::runtime_error("key or content mismatch");
    }
    return draws;
  } catch (const std::exception& e) {
    std::cerr << "warning: pivotal cache " << file.string() << " is unreadable (" << e.what()
              << "); recomputing\n";
    return {};
  }
}

}  // namespace

QuantileTable cached_table(const PivotalConfig& config, std::span<const double> levels,
                           const std::filesystem::path& cache_dir) {
  config.validate();
  const auto file = cache_file(config, cache_dir);
  auto draws = load_cached_draws(file, config);
  if (draws.empty()) {
    draws = draw_pivotal(config);
    std::sort(draws.begin(), draws.end());
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    nlohmann::ordered_json j;
    j["nu0"] = config.nu0;
    j["Q"] = config.Q;
    j["n_paths"] = config.n_paths;
    j["n_steps"] = config.n_steps;
    j["seed"] = config.seed;
    j["sorted_draws"] = draws;
    std::ofstream out(file);
    if (out) {
      out << j.dump() << '\n';
    } else {
      std::cerr << "warning: cannot write pivotal cache " << file.string() << '\n';
    }
  }
  return quantiles(draws, levels, config);
}

double cached_quantile(const PivotalConfig& config, double level, const std::filesystem::path& cache_dir) {
  const double levels[] = {level};
  return cached_table(config, levels, cache_dir).at(level);
}

}  // namespace relslope
