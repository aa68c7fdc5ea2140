#pragma once

// Monte-Carlo law of the pivotal ratio
//   W_Q = B(1) / { (1 - nu0)/Q * sum_q |nu_q B(nu_q) - nu_q^2 B(1)|^2 }^{1/2}
// for a standard Brownian motion B, and on-disk caching of its quantiles.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace relslope {

inline constexpr std::uint64_t kDefaultPivotSeed = 20240601;

struct PivotalConfig {
  double nu0 = 0.5;
  int Q = 25;
  int n_paths = 10000;
  int n_steps = 2048;
  std::uint64_t seed = kDefaultPivotSeed;

  void validate() const;
};

struct QuantileTable {
  PivotalConfig config;
  std::map<double, double> quantiles;  // level -> quantile
  std::vector<double> draws;           // optional, sorted

  /// Throws ContractError if `level` is not in the table.
  double at(double level) const;
  bool has(double level) const;
};

/// Brownian lattice indices floor(nu_q n_steps) used for nu_1..nu_Q.
std::vector<int> lattice_indices(const PivotalConfig& config);

/// n_paths independent draws of W_Q; deterministic in the config.
/// Each path reads B on the lattice k / n_steps at the left point of every
/// nu_q; lattice values are built from independent Gaussian increments.
std::vector<double> draw_pivotal(const PivotalConfig& config);

/// W_Q for one path given B at the lattice points of `lattice_indices`
/// (last entry is B(1)).
double pivotal_ratio(const PivotalConfig& config, std::span<const double> brownian_at_lattice);

/// Order-statistic quantile: the ceil(level * n)-th smallest draw.
double empirical_quantile(std::span<const double> sorted_draws, double level);

QuantileTable quantiles(std::span<const double> draws, std::span<const double> levels,
                        const PivotalConfig& config, bool keep_draws = false);

inline const std::vector<double> kDefaultLevels{0.90, 0.95, 0.99};

/// Number of draw_pivotal calls since program start.
std::uint64_t simulation_count();
/// Number of paths redrawn because the normalizer vanished.
std::uint64_t redrawn_paths();

std::filesystem::path cache_file(const PivotalConfig& config, const std::filesystem::path& cache_dir);

/// Table from the on-disk cache (sorted draws keyed by the full config);
/// simulates and writes on a miss. Corrupt files are recomputed with a warning.
QuantileTable cached_table(const PivotalConfig& config, std::span<const double> levels,
                           const std::filesystem::path& cache_dir);
double cached_quantile(const PivotalConfig& config, double level, const std::filesystem::path& cache_dir);

}  // namespace relslope
