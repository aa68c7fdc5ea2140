#include "relslope/errors.hpp"
#include "relslope/pivotal.hpp"
#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using namespace relslope;
using Catch::Approx;

namespace {

PivotalConfig config(double nu0, int Q, std::uint64_t seed = kDefaultPivotSeed) {
  PivotalConfig c;
  c.nu0 = nu0;
  c.Q = Q;
  c.seed = seed;
  return c;
}

double quantile_of(const PivotalConfig& c, double level) {
  const double lv[] = {level};
  return quantiles(draw_pivotal(c), lv, c).at(level);
}

/// Standard deviation of the quantile estimate over 20 independent seeds.
double seed_se(double nu0, int Q, double level) {
  std::vector<double> est;
  for (std::uint64_t s = 1; s <= 20; ++s) est.push_back(quantile_of(config(nu0, Q, s), level));
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
  double acc = 0.0;
  for (double e : est) acc += (e - mean) * (e - mean);
  return std::sqrt(acc / (est.size() - 1));
}

}  // namespace

TEST_CASE("lattice indices") {
  PivotalConfig c = config(0.5, 4);
  c.n_steps = 1000;
  CHECK(lattice_indices(c) == std::vector<int>{625, 750, 875, 1000});
  c.n_steps = 2048;
  const auto idx = lattice_indices(c);
  CHECK(idx.back() == 2048);
  CHECK(idx.front() == static_cast<int>(std::floor(0.625 * 2048)));
}

TEST_CASE("pivotal ratio") {
  const PivotalConfig c = config(0.5, 4);
  const std::vector<double> b{0.3, -0.2, 0.9, 1.1};
  const double w = pivotal_ratio(c, b);
  double acc = 0.0;
  const double nus[] = {0.625, 0.75, 0.875, 1.0};
  for (int q = 0; q < 4; ++q) acc += std::pow(nus[q] * b[q] - nus[q] * nus[q] * b[3], 2);
  CHECK(w == Approx(1.1 / std::sqrt(0.5 / 4 * acc)).epsilon(1e-14));
  SECTION("scale invariance") {
    for (double s : {1e-3, 0.7, 42.0}) {
      std::vector<double> scaled;
      for (double v : b) scaled.push_back(s * v);
      CHECK(pivotal_ratio(c, scaled) == Approx(w).epsilon(1e-14));
    }
  }
  SECTION("vanishing normalizer") {
    CHECK(std::isnan(pivotal_ratio(c, std::vector<double>{0.0, 0.0, 0.0, 0.0})));
  }
}

TEST_CASE("draws are deterministic in the seed") {
  const auto a = draw_pivotal(config(0.5, 25));
  const auto b = draw_pivotal(config(0.5, 25));
  CHECK(a == b);
  CHECK(a.size() == 10000);
  CHECK(a != draw_pivotal(config(0.5, 25, 7)));
}

TEST_CASE("distribution is symmetric about zero") {
  auto draws = draw_pivotal(config(0.5, 25));
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[4999] + sorted[5000]);
  CHECK(std::abs(median) <= 0.3);
  // two-sample KS between the first half and the negated second half
  std::vector<double> first(draws.begin(), draws.begin() + 5000), second;
  for (auto it = draws.begin() + 5000; it != draws.end(); ++it) second.push_back(-*it);
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  std::size_t i = 0, j = 0;
  double ks = 0.0;
  while (i < first.size() && j < second.size()) {
    if (first[i] <= second[j]) ++i; else ++j;
    ks = std::max(ks, std::abs(static_cast<double>(i) - static_cast<double>(j)) / 5000.0);
  }
  CHECK(ks < 1.63 * std::sqrt(2.0 / 5000.0));
}

TEST_CASE("order-statistic quantiles") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile(v, 0.95) == 10.0);
  CHECK(empirical_quantile(v, 0.9) == 9.0);
  CHECK(empirical_quantile(v, 0.5) == 5.0);
  CHECK(empirical_quantile(v, 0.01) == 1.0);
  const std::vector<double> constant(50, 3.25);
  const auto t = quantiles(constant, kDefaultLevels, PivotalConfig{});
  for (double level : kDefaultLevels) CHECK(t.at(level) == 3.25);
  CHECK_THROWS_AS(t.at(0.975), ContractError);
  CHECK_FALSE(t.has(0.5));
  CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), ContractError);
}

TEST_CASE("quantiles increase with the level") {
  const auto c = config(0.25, 25);
  const std::vector<double> levels{0.5, 0.8, 0.9, 0.95, 0.975, 0.99, 0.995};
  const auto t = quantiles(draw_pivotal(c), levels, c);
  double prev = -std::numeric_limits<double>::infinity();
  for (double l : levels) {
    CHECK(t.at(l) >= prev);
    prev = t.at(l);
  }
}

TEST_CASE("tabulated quantiles are reproduced") {
  SECTION("nu0 = 1/2, Q = 25, 95%") {
    const double q = quantile_of(config(0.5, 25), 0.95);
    CHECK(q >= 10.9);
    CHECK(q <= 12.2);
  }
  SECTION("nu0 = 1/4, Q = 25") {
    const auto c = config(0.25, 25);
    const auto t = quantiles(draw_pivotal(c), kDefaultLevels, c);
    const double expected[] = {7.349, 10.21, 16.43};
    for (int i = 0; i < 3; ++i) {
      const double level = kDefaultLevels[i];
      CHECK(std::abs(t.at(level) - expected[i]) <= 3.0 * seed_se(0.25, 25, level));
    }
  }
  SECTION("nu0 = 1/2, Q = 100, 95%") {
    CHECK(std::abs(quantile_of(config(0.5, 100), 0.95) - 12.09) <= 3.0 * seed_se(0.5, 100, 0.95));
  }
}

TEST_CASE("finer Brownian lattice leaves the quantile within Monte-Carlo error") {
  auto fine = config(0.5, 25);
  fine.n_steps = 4096;
  const double coarse_q = quantile_of(config(0.5, 25), 0.95);
  CHECK(std::abs(quantile_of(fine, 0.95) - coarse_q) <= 3.0 * seed_se(0.5, 25, 0.95));
}

TEST_CASE("config validation") {
  auto c = config(0.5, 25);
  c.n_paths = 999;
  CHECK_THROWS_AS(draw_pivotal(c), ContractError);
  c = config(0.5, 25);
  c.n_steps = 256;
  CHECK_THROWS_AS(draw_pivotal(c), ContractError);
  CHECK_THROWS_AS(draw_pivotal(config(1.0, 25)), ContractError);
  CHECK_THROWS_AS(draw_pivotal(config(0.5, 0)), ContractError);
}

TEST_CASE("quantile cache") {
  const auto dir = testing::scratch_dir("pivotal_cache");
  const auto c = config(0.5, 25);
  const double first = cached_quantile(c, 0.95, dir);
  REQUIRE(std::filesystem::exists(cache_file(c, dir)));
  const auto before = simulation_count();
  CHECK(cached_quantile(c, 0.95, dir) == first);
  CHECK(simulation_count() == before);
  // another level from the same key is served from the stored draws too
  CHECK(cached_quantile(c, 0.99, dir) > first);
  CHECK(simulation_count() == before);

  std::filesystem::remove(cache_file(c, dir));
  CHECK(cached_quantile(c, 0.95, dir) == first);
  CHECK(simulation_count() == before + 1);

  std::ofstream(cache_file(c, dir)) << "{ not json";
  CHECK(cached_quantile(c, 0.95, dir) == first);
  CHECK(simulation_count() == before + 2);
  CHECK(cached_quantile(c, 0.95, dir) == first);
  CHECK(simulation_count() == before + 2);

  const auto other = config(0.5, 25, 99);
  const double q2 = cached_quantile(other, 0.95, dir);
  CHECK(q2 != first);
  CHECK(q2 >= 10.9);
  CHECK(q2 <= 12.2);
}
