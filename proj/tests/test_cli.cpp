#include "cli.hpp"
#include "relslope/simharness.hpp"
#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace relslope;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "relslope");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Files {
  std::string x;
  std::string y;
};

Files scalar_dataset(const std::filesystem::path& dir, SlopeKind slope, std::uint64_t seed) {
  DgpSpec spec;
  spec.slope = slope;
  spec.n = 100;
  spec.seed = seed;
  const auto s = gen_sample(spec);
  const auto x = dir / ("x" + std::to_string(seed) + ".csv");
  const auto y = dir / ("y" + std::to_string(seed) + ".csv");
  write_curves_csv(x, s.X);
  write_scalars_csv(y, s.y);
  return {x.string(), y.string()};
}

Files functional_dataset(const std::filesystem::path& dir) {
  DgpSpec spec;
  spec.slope = SlopeKind::F2;
  spec.n = 100;
  spec.seed = 9;
  const auto s = gen_sample(spec);
  write_curves_csv(dir / "fx.csv", s.X);
  write_curves_csv(dir / "fy.csv", s.Y);
  return {(dir / "fx.csv").string(), (dir / "fy.csv").string()};
}

// quick pivot settings keep the command tests fast
const std::vector<std::string> kFastPivot{"--paths", "2000", "--steps", "512"};

std::vector<std::string> with_pivot(std::vector<std::string> args) {
  args.insert(args.end(), kFastPivot.begin(), kFastPivot.end());
  return args;
}

}  // namespace

TEST_CASE("quantiles command") {
  const auto r = cli({"quantiles", "--nu0", "0.5", "--Q", "25", "--paths", "10000"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["n_paths"] == 10000);
  bool found = false;
  for (const auto& row : j["quantiles"]) {
    if (std::abs(row["level"].get<double>() - 0.95) < 1e-12) {
      found = true;
      CHECK(row["quantile"].get<double>() >= 10.9);
      CHECK(row["quantile"].get<double>() <= 12.2);
    }
  }
  CHECK(found);
  const auto custom = cli({"quantiles", "--paths", "1000", "--levels", "0.5,0.8", "--format", "table"});
  CHECK(custom.code == kExitOk);
  CHECK(custom.out.find("0.5") != std::string::npos);
}

TEST_CASE("scalar test command") {
  const auto dir = testing::scratch_dir("cli_scalar");
  const auto f = scalar_dataset(dir, SlopeKind::S2, 4);
  SECTION("huge threshold is not rejected") {
    const auto r = cli(with_pivot({"test-scalar", f.x, f.y, "--delta", "1000"}));
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["reject"] == false);
    CHECK(j["problem"] == "scalar-on-function");
    CHECK(j["n"] == 100);
    CHECK(j["lambda_selection"] == "gcv");
    CHECK(j["statistics"]["T"].get<double>() > 0.5);
  }
  SECTION("byte-identical output across runs") {
    const auto a = cli(with_pivot({"test-scalar", f.x, f.y, "--delta", "0.5"}));
    const auto b = cli(with_pivot({"test-scalar", f.x, f.y, "--delta", "0.5"}));
    REQUIRE(a.code == kExitOk);
    CHECK(a.out == b.out);
  }
  SECTION("output file and table format") {
    const auto path = (dir / "report.txt").string();
    const auto r = cli(with_pivot({"test-scalar", f.x, f.y, "--delta", "0.5", "--format", "table", "-o", path}));
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.empty());
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    CHECK(text.str().find("decision") != std::string::npos);
  }
  SECTION("fixed lambda") {
    const auto r = cli(with_pivot({"test-scalar", f.x, f.y, "--delta", "0.5", "--lambda", "0.001"}));
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["lambda"] == 0.001);
    CHECK(j["lambda_selection"] == "fixed");
  }
  SECTION("confidence intervals") {
    const auto r = cli(with_pivot({"ci", f.x, f.y}));
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["two_sided"]["upper"].get<double>() >= j["one_sided"]["upper"].get<double>());
    CHECK(j["one_sided"]["lower"] == 0.0);
  }
}

TEST_CASE("two-sample and location commands") {
  const auto dir = testing::scratch_dir("cli_two");
  const auto a = scalar_dataset(dir, SlopeKind::S2, 5);
  const auto b = scalar_dataset(dir, SlopeKind::S2, 6);
  const auto r = cli(with_pivot({"test-two-sample", a.x, a.y, b.x, b.y, "--delta", "1000"}));
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["reject"] == false);
  CHECK(j.contains("lambda_second_sample"));

  DgpSpec spec;
  spec.slope = SlopeKind::S2;
  write_curves_csv(dir / "star.csv", std::vector<Curve>{make_slope_scalar(spec)});
  const auto loc = cli(with_pivot({"test-location", a.x, a.y, (dir / "star.csv").string(), "--delta", "0.1"}));
  REQUIRE(loc.code == kExitOk);
  CHECK(nlohmann::json::parse(loc.out)["problem"] == "location");
}

TEST_CASE("functional test command with a sweep") {
  const auto dir = testing::scratch_dir("cli_functional");
  const auto f = functional_dataset(dir);
  const auto r = cli(with_pivot({"test-functional", f.x, f.y, "--r", "6", "--delta-sweep", "0.19,0.33,0.42"}));
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["decisions"].size() == 3);
  bool previous = true;
  for (const auto& d : j["decisions"]) {
    const bool now = d["reject"].get<bool>();
    CHECK((previous || !now));
    previous = now;
  }
  CHECK_FALSE(j.contains("reject"));
}

TEST_CASE("project command") {
  const auto dir = testing::scratch_dir("cli_project");
  {
    std::ofstream raw(dir / "raw.csv");
    for (int row = 0; row < 3; ++row) {
      const auto t = midpoint_times(365);
      for (std::size_t i = 0; i < t.size(); ++i) raw << (i ? "," : "") << 1.0 + row * fourier_function(1, t[i]);
      raw << '\n';
    }
  }
  const auto out = (dir / "curves.csv").string();
  const auto r = cli({"project", (dir / "raw.csv").string(), "-o", out});
  REQUIRE(r.code == kExitOk);
  const auto curves = read_curves_csv(out, Grid(), CsvHeader::automatic);
  REQUIRE(curves.size() == 3);
  CHECK(curves[2][50] == Catch::Approx(1.0 + 2.0 * fourier_function(1, 0.5)).margin(1e-9));
}

TEST_CASE("exit codes") {
  const auto dir = testing::scratch_dir("cli_exit");
  const auto f = scalar_dataset(dir, SlopeKind::S2, 7);
  CHECK(cli({"--version"}).code == kExitOk);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"test-scalar", f.x, f.y, "--delta", "1", "--bogus"}).code == kExitUsage);
  const auto missing = cli({"test-scalar", f.x, f.y});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("--delta") != std::string::npos);
  CHECK(cli({"test-scalar", f.x, f.y, "--delta", "-1"}).code == kExitUsage);
  CHECK(cli({"test-scalar", f.x, f.y, "--delta", "1", "--nu0", "1.5"}).code == kExitUsage);
  CHECK(cli({"test-scalar", f.x, f.y, "--delta", "1", "--lambda", "-2"}).code == kExitUsage);
  CHECK(cli({"test-scalar", f.x, f.y, "--delta", "1", "--delta-sweep", "1,2"}).code == kExitUsage);
  CHECK(cli({"simulate", "--runs", "10"}).code == kExitUsage);
  CHECK(cli({"test-scalar", (dir / "absent.csv").string(), f.y, "--delta", "1"}).code == kExitUsage);

  {
    std::ofstream ragged(dir / "ragged.csv");
    ragged << "1,2,3\n4,5\n";
  }
  const auto rag = cli({"test-scalar", (dir / "ragged.csv").string(), f.y, "--delta", "1"});
  CHECK(rag.code == kExitData);
  CHECK_FALSE(rag.err.empty());

  {
    std::ofstream short_y(dir / "short.csv");
    short_y << "y\n1\n2\n3\n";
  }
  const auto mismatch = cli({"test-scalar", f.x, (dir / "short.csv").string(), "--delta", "1"});
  CHECK(mismatch.code == kExitData);
  CHECK(mismatch.err.find("short.csv") != std::string::npos);
  CHECK(cli({"simulate", "--slope", "S9"}).code == kExitData);

  // constant predictors leave no directions for the eigen-system
  {
    std::ofstream flat(dir / "flat.csv");
    for (int i = 0; i < 100; ++i) {
      for (int k = 0; k < 101; ++k) flat << (k ? "," : "") << 1.0;
      flat << '\n';
    }
  }
  const auto numeric = cli(with_pivot({"test-scalar", (dir / "flat.csv").string(), f.y, "--delta", "1"}));
  CHECK(numeric.code == kExitNumerical);
}

TEST_CASE("simulate command") {
  const auto dir = testing::scratch_dir("cli_sim");
  const auto prefix = (dir / "exp").string();
  const auto r = cli(with_pivot({"simulate", "--slope", "S2", "--n", "60", "--runs", "50", "--deltas", "0,1000", "-o", prefix}));
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::filesystem::exists(prefix + ".csv"));
  CHECK(std::filesystem::exists(prefix + ".json"));
  CHECK(j.dump().find("p_reject") != std::string::npos);
}
