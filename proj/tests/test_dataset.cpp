#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "lcnr/config.hpp"
#include "lcnr/dataset.hpp"
#include "support.hpp"

using namespace lcnr;
using Catch::Approx;

TEST_CASE("perfect-clamping shift follows the squared curvature", "[dataset]") {
  const auto& modes = data::reference_modes();
  const double gamma2 = 0.0033459;
  for (double x : {10.0, 56.0, 250.0, 500.0, 777.0}) {
    const auto rfs = data::rfs_perfect(gamma2, x);
    for (int m = 0; m < data::kModeCount; ++m) {
      const auto& mode = modes[static_cast<std::size_t>(m)];
      // Direct textbook curvature evaluation as an independent check. The
      // cosh and sigma*sinh terms cancel almost exactly at large u, and a
      // double-rounded sigma alone already perturbs that difference by more
      // than the margin, so the reference rederives sigma from the
      // eigenvalue and evaluates everything in extended precision.
      const long double lambda = static_cast<long double>(mode.eigenvalue);
      const long double sigma =
          (std::cosh(lambda) + std::cos(lambda)) / (std::sinh(lambda) + std::sin(lambda));
      const long double u = lambda * static_cast<long double>(x / data::kBeamLengthMm);
      const long double curv =
          0.5L * (std::cosh(u) + std::cos(u) - sigma * (std::sinh(u) + std::sin(u)));
      const double expected = static_cast<double>(static_cast<long double>(gamma2) * curv * curv);
      CHECK(rfs[static_cast<std::size_t>(m)] == Approx(expected).epsilon(0).margin(1e-12));
    }
  }
}

TEST_CASE("shift at the clamp equals the severity, at the tip zero", "[dataset]") {
  const double gamma2 = 0.0262;
  const auto at_root = data::rfs_perfect(gamma2, 0.0);
  const auto at_tip = data::rfs_perfect(gamma2, 1000.0);
  for (int m = 0; m < data::kModeCount; ++m) {
    CHECK(at_root[static_cast<std::size_t>(m)] == gamma2);
    CHECK(at_tip[static_cast<std::size_t>(m)] == 0.0);
  }
}

TEST_CASE("imperfect clamping adds a constant offset per mode", "[dataset]") {
  const double gamma1 = 0.0021409;
  const double gamma2 = 0.0033459;
  for (double x : {56.0, 320.0, 890.0}) {
    const auto perfect = data::rfs_perfect(gamma2, x);
    const auto imperfect = data::rfs_imperfect(gamma1, gamma2, x);
    for (int m = 0; m < data::kModeCount; ++m)
      CHECK(imperfect[static_cast<std::size_t>(m)] - perfect[static_cast<std::size_t>(m)] ==
            Approx(gamma1).epsilon(0).margin(1e-14));
  }
}

TEST_CASE("frozen imperfect-clamping value", "[dataset]") {
  const auto rfs = data::rfs_imperfect(0.0021409, 0.0033459, 56.0);
  CHECK(rfs[0] == Approx(oracle::kImperfectMode1At56).epsilon(0).margin(1e-12));
}

TEST_CASE("shift domain checks", "[dataset]") {
  CHECK_THROWS_AS(data::rfs_perfect(1.0, 100.0), DomainError);
  CHECK_THROWS_AS(data::rfs_perfect(-0.1, 100.0), DomainError);
  CHECK_THROWS_AS(data::rfs_perfect(0.01, -1.0), DomainError);
  CHECK_THROWS_AS(data::rfs_perfect(0.01, 1000.5), DomainError);
  CHECK_THROWS_AS(data::rfs_imperfect(-0.01, 0.01, 100.0), DomainError);
  // combined shift at the clamp must stay below 1
  CHECK_THROWS_AS(data::rfs_imperfect(0.6, 0.5, 100.0), DomainError);
}

TEST_CASE("synthesize matches the scenario fields", "[dataset]") {
  data::DamageScenario sc;
  sc.clamp_severity = 0.0011145694405496356;
  sc.crack_position_mm = 444.0;
  sc.crack_severity = 0.0262;
  sc.crack_depth_ratio = 0.50;
  const auto rfs = data::synthesize(sc);
  const auto expected = data::rfs_imperfect(sc.clamp_severity, sc.crack_severity, sc.crack_position_mm);
  CHECK(rfs == expected);

  sc.clamp_severity = 0.0;
  CHECK(data::synthesize(sc) == data::rfs_perfect(sc.crack_severity, sc.crack_position_mm));
}

TEST_CASE("default grid cardinality and ordering", "[dataset]") {
  data::GridConfig cfg;
  CHECK(cfg.positions_mm().size() == 501);
  CHECK(cfg.depth_ratios().size() == 16);
  CHECK(cfg.clamp_severities(beam::SeverityModel::reference()).size() == 5);

  const auto grid = data::generate_grid(cfg);
  CHECK(grid.size() == 40080);
  // clamping-major: the first 501*16 rows are perfectly clamped
  for (std::size_t i = 0; i < 501 * 16; ++i) CHECK(grid[i].scenario.perfect_clamping());
  CHECK_FALSE(grid[501 * 16].scenario.perfect_clamping());
  // within a clamp block positions advance slowly, depths sweep fastest
  CHECK(grid[0].scenario.crack_position_mm == 0.0);
  CHECK(grid[0].scenario.crack_depth_ratio == Approx(0.04));
  CHECK(grid[1].scenario.crack_position_mm == 0.0);
  CHECK(grid[1].scenario.crack_depth_ratio == Approx(0.08));
  CHECK(grid[15].scenario.crack_depth_ratio == Approx(0.64));
  CHECK(grid[16].scenario.crack_position_mm == 2.0);
  CHECK(grid[16].scenario.crack_depth_ratio == Approx(0.04));
  CHECK(grid[501 * 16 - 1].scenario.crack_position_mm == 1000.0);
}

TEST_CASE("grid rows reproduce their own synthesis", "[dataset]") {
  data::GridConfig cfg;
  cfg.position_step_mm = 100.0;
  cfg.depth_step = 0.16;
  const auto grid = data::generate_grid(cfg);
  CHECK(grid.size() == 5 * 11 * 4);
  for (const auto& sample : grid) {
    CHECK(sample.source == data::Source::analytic);
    CHECK(sample.rfs == data::synthesize(sample.scenario));
  }
}

TEST_CASE("grid clamp severities come from the depth ratios", "[dataset]") {
  data::GridConfig cfg;
  const auto model = beam::SeverityModel::reference();
  const auto clamps = cfg.clamp_severities(model);
  REQUIRE(clamps.size() == 5);
  CHECK(clamps[0] == 0.0);
  CHECK(clamps[1] == Approx(oracle::kSeverity010).epsilon(0).margin(5e-15));
  CHECK(clamps[2] == Approx(oracle::kSeverity04o3).epsilon(0).margin(5e-15));
  CHECK(clamps[3] == Approx(oracle::kSeverity05o3).epsilon(0).margin(5e-15));
  CHECK(clamps[4] == model.severity(0.20));
}

TEST_CASE("grid config from key-value text", "[dataset]") {
  support::TempDir dir("gridcfg");
  {
    std::ofstream out(dir.file("grid.cfg"));
    out << "position_start_mm = 0\nposition_stop_mm = 100\nposition_step_mm = 50\n";
    out << "depth_start = 0.2\ndepth_stop = 0.4\ndepth_step = 0.2\n";
    out << "clamp_depth_ratios = 0.10, 0.20\ninclude_perfect = 1\n";
  }
  const auto setup = data::grid_from_config(config::Config::from_file(dir.file("grid.cfg")));
  const auto grid = data::generate_grid(setup.grid, setup.severity);
  CHECK(grid.size() == 3 * 3 * 2);

  {
    std::ofstream out(dir.file("bad.cfg"));
    out << "position_strt_mm = 0\n";
  }
  CHECK_THROWS_AS(data::grid_from_config(config::Config::from_file(dir.file("bad.cfg"))), ConfigError);
}

TEST_CASE("split partitions the dataset deterministically", "[dataset]") {
  data::GridConfig cfg;
  cfg.position_step_mm = 25.0;
  const auto grid = data::generate_grid(cfg);
  const auto split = data::split_shuffle(grid, 0.7, 42);
  CHECK(split.train.size() == static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(grid.size()))));
  CHECK(split.train.size() + split.test.size() == grid.size());

  // multiset equality via sorted scenario keys
  auto key = [](const data::RfsSample& s) {
    return std::tuple(s.scenario.clamp_severity, s.scenario.crack_position_mm, s.scenario.crack_depth_ratio);
  };
  std::vector<std::tuple<double, double, double>> all, recombined;
  for (const auto& s : grid) all.push_back(key(s));
  for (const auto& s : split.train) recombined.push_back(key(s));
  for (const auto& s : split.test) recombined.push_back(key(s));
  std::sort(all.begin(), all.end());
  std::sort(recombined.begin(), recombined.end());
  CHECK(all == recombined);

  const auto again = data::split_shuffle(grid, 0.7, 42);
  CHECK(again.train.size() == split.train.size());
  bool same = true;
  for (std::size_t i = 0; i < split.train.size(); ++i)
    same = same && key(again.train[i]) == key(split.train[i]);
  CHECK(same);

  const auto other = data::split_shuffle(grid, 0.7, 43);
  bool identical = true;
  for (std::size_t i = 0; i < split.train.size(); ++i)
    identical = identical && key(other.train[i]) == key(split.train[i]);
  CHECK_FALSE(identical);
}

TEST_CASE("split validation", "[dataset]") {
  data::GridConfig cfg;
  cfg.position_step_mm = 500.0;
  cfg.depth_step = 0.64;
  const auto tiny = data::generate_grid(cfg);  // 5 * 3 * 1 = 15 rows
  CHECK_THROWS_AS(data::split_shuffle(tiny, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(data::split_shuffle(tiny, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(data::split_shuffle(std::vector<data::RfsSample>(tiny.begin(), tiny.begin() + 9), 0.5, 1),
                  ConfigError);
}

TEST_CASE("k-fold plan is balanced and exhaustive", "[dataset]") {
  const auto plan = data::make_kfold(103, 5, 7);
  CHECK(plan.k == 5);
  std::vector<std::size_t> sizes(5, 0);
  for (int f : plan.fold_of) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++sizes[static_cast<std::size_t>(f)];
  }
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  CHECK(*hi - *lo <= 1);
  std::size_t total = 0;
  for (int f = 0; f < 5; ++f) {
    const auto members = plan.fold_members(f);
    CHECK(members.size() == sizes[static_cast<std::size_t>(f)]);
    total += members.size();
  }
  CHECK(total == 103);

  const auto same = data::make_kfold(103, 5, 7);
  CHECK(same.fold_of == plan.fold_of);
  const auto different = data::make_kfold(103, 5, 8);
  CHECK(different.fold_of != plan.fold_of);

  CHECK_THROWS_AS(data::make_kfold(10, 1, 7), ConfigError);
  CHECK_THROWS_AS(data::make_kfold(10, 11, 7), ConfigError);
}

TEST_CASE("noise is seeded, scaled, and clamped", "[dataset]") {
  data::GridConfig cfg;
  cfg.position_step_mm = 20.0;
  cfg.depth_step = 0.08;
  const auto grid = data::generate_grid(cfg);

  const auto noisy = data::add_noise(grid, 0.02, 9);
  REQUIRE(noisy.size() == grid.size());
  const auto repeat = data::add_noise(grid, 0.02, 9);
  bool deterministic = true;
  for (std::size_t i = 0; i < noisy.size(); ++i) deterministic = deterministic && noisy[i].rfs == repeat[i].rfs;
  CHECK(deterministic);

  const auto clean = data::add_noise(grid, 0.0, 9);
  bool untouched = true;
  for (std::size_t i = 0; i < clean.size(); ++i) untouched = untouched && clean[i].rfs == grid[i].rfs;
  CHECK(untouched);

  double max_entry = 0.0;
  for (const auto& s : grid)
    for (double v : s.rfs) max_entry = std::max(max_entry, v);
  const double sigma = 0.02 * max_entry;

  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i)
    for (int m = 0; m < data::kModeCount; ++m) {
      const double d = noisy[i].rfs[static_cast<std::size_t>(m)] - grid[i].rfs[static_cast<std::size_t>(m)];
      sum += d;
      sum_sq += d * d;
      ++n;
      CHECK(noisy[i].rfs[static_cast<std::size_t>(m)] >= 0.0);
      CHECK(noisy[i].rfs[static_cast<std::size_t>(m)] < 1.0);
    }
  const double mean = sum / static_cast<double>(n);
  const double std_dev = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
  // loose band: clamping at zero skews the small-signal tail slightly
  CHECK(std::abs(mean) < 0.1 * sigma);
  CHECK(std_dev == Approx(sigma).epsilon(0.1));

  CHECK_THROWS_AS(data::add_noise(grid, -0.1, 9), ConfigError);
}

TEST_CASE("dataset CSV round trip is exact", "[dataset]") {
  support::TempDir dir("csv");
  data::GridConfig cfg;
  cfg.position_step_mm = 125.0;
  cfg.depth_step = 0.12;
  auto grid = data::generate_grid(cfg);
  grid[3].source = data::Source::experimental;

  const std::string path = dir.file("data.csv");
  data::save_csv(grid, path);
  const auto loaded = data::load_rfs_csv(path);
  CHECK(loaded.warnings.empty());
  CHECK(loaded.scenario_only.empty());
  REQUIRE(loaded.samples.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(loaded.samples[i].rfs == grid[i].rfs);
    CHECK(loaded.samples[i].scenario.clamp_severity == grid[i].scenario.clamp_severity);
    CHECK(loaded.samples[i].scenario.crack_position_mm == grid[i].scenario.crack_position_mm);
    CHECK(loaded.samples[i].scenario.crack_depth_ratio == grid[i].scenario.crack_depth_ratio);
    CHECK(loaded.samples[i].scenario.crack_severity == grid[i].scenario.crack_severity);
    CHECK(loaded.samples[i].source == grid[i].source);
  }
}

TEST_CASE("loader accepts scenario-only rows", "[dataset]") {
  support::TempDir dir("fem");
  {
    std::ofstream out(dir.file("fem.csv"));
    out << "scenario_id,clamp_severity,crack_x_mm,crack_depth_ratio,crack_severity,"
           "rfs_m1,rfs_m2,rfs_m3,rfs_m4,rfs_m5,rfs_m6,rfs_m7,rfs_m8,source\n";
    out << "1,0,56,0.2,0.0033459,,,,,,,,,fem\n";
    out << "2,0,81,0.2,0.0033459,,,,,,,,,fem\n";
  }
  const auto loaded = data::load_rfs_csv(dir.file("fem.csv"));
  CHECK(loaded.samples.empty());
  REQUIRE(loaded.scenario_only.size() == 2);
  CHECK(loaded.scenario_only[0].crack_position_mm == 56.0);
  CHECK(loaded.scenario_only[1].crack_position_mm == 81.0);
}

TEST_CASE("loader rejects malformed rows", "[dataset]") {
  support::TempDir dir("bad");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir.file(name));
    out << "scenario_id,clamp_severity,crack_x_mm,crack_depth_ratio,crack_severity,"
           "rfs_m1,rfs_m2,rfs_m3,rfs_m4,rfs_m5,rfs_m6,rfs_m7,rfs_m8,source\n"
        << body;
    return dir.file(name);
  };
  CHECK_THROWS_AS(data::load_rfs_csv(dir.file("absent.csv")), IoError);
  // wrong column count
  CHECK_THROWS_AS(data::load_rfs_csv(write("cols.csv", "1,0,56,0.2,0.0033459,fem\n")), ParseError);
  // partially filled RFS cells
  CHECK_THROWS_AS(
      data::load_rfs_csv(write("partial.csv", "1,0,56,0.2,0.0033459,0.001,,,,,,,,analytic\n")),
      ParseError);
  // RFS outside [0,1)
  CHECK_THROWS_AS(
      data::load_rfs_csv(write("range.csv", "1,0,56,0.2,0.0033459,1.5,0,0,0,0,0,0,0,analytic\n")),
      ValidationError);
  // position beyond the beam
  CHECK_THROWS_AS(
      data::load_rfs_csv(write("pos.csv", "1,0,5600,0.2,0.0033459,0,0,0,0,0,0,0,0,analytic\n")),
      ValidationError);
  // bad source label
  CHECK_THROWS_AS(
      data::load_rfs_csv(write("src.csv", "1,0,56,0.2,0.0033459,0,0,0,0,0,0,0,0,guess\n")),
      ParseError);
  // header mismatch
  {
    std::ofstream out(dir.file("hdr.csv"));
    out << "a,b,c\n";
  }
  CHECK_THROWS_AS(data::load_rfs_csv(dir.file("hdr.csv")), ParseError);
}

TEST_CASE("parse errors carry line numbers", "[dataset]") {
  support::TempDir dir("lineno");
  {
    std::ofstream out(dir.file("x.csv"));
    out << "scenario_id,clamp_severity,crack_x_mm,crack_depth_ratio,crack_severity,"
           "rfs_m1,rfs_m2,rfs_m3,rfs_m4,rfs_m5,rfs_m6,rfs_m7,rfs_m8,source\n";
    out << "1,0,56,0.2,0.0033459,0,0,0,0,0,0,0,0,analytic\n";
    out << "2,0,81,not-a-number,0.0033459,0,0,0,0,0,0,0,0,analytic\n";
  }
  try {
    data::load_rfs_csv(dir.file("x.csv"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("packaged fixture tables load", "[dataset]") {
  const std::string dir = LCNR_FIXTURES_DIR;
  const auto experimental = data::load_rfs_csv(dir + "/experimental_table5.csv");
  REQUIRE(experimental.samples.size() == 6);
  CHECK(experimental.samples[0].rfs[0] == 0.020610);
  CHECK(experimental.samples[0].scenario.crack_position_mm == 98.0);
  CHECK(experimental.samples[5].scenario.clamp_severity > 0.0);
  for (const auto& s : experimental.samples) CHECK(s.source == data::Source::experimental);

  const auto fem = data::load_rfs_csv(dir + "/fem_positions_table3.csv");
  CHECK(fem.samples.empty());
  CHECK(fem.scenario_only.size() == 26);
}
