#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcnr/report.hpp"
#include "support.hpp"

using namespace lcnr;
using Catch::Approx;

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<report::EvalRow> sample_rows() {
  return {
      report::EvalRow::make("a", "perfect", 56.0, 52.605),
      report::EvalRow::make("b", "perfect", 173.0, 140.818),
      report::EvalRow::make("c", "imperfect", 466.0, 423.707),
      report::EvalRow::make("d", "imperfect", 946.0, 964.947),
      report::EvalRow::make("e", "perfect", 310.0, 320.0),
  };
}

}  // namespace

TEST_CASE("error percent normalizes by the beam length", "[report]") {
  CHECK(fixed3(report::error_percent(56.0, 52.605)) == "0.340");
  CHECK(fixed3(report::error_percent(173.0, 140.818)) == "3.218");
  CHECK(fixed3(report::error_percent(466.0, 423.707)) == "4.229");
  CHECK(report::error_percent(946.0, 964.947) == Approx(1.8947).epsilon(1e-12));

  // symmetric in the sign of the miss, invariant to a shared shift
  CHECK(report::error_percent(500.0, 510.0) == report::error_percent(500.0, 490.0));
  CHECK(report::error_percent(100.0, 130.0) == Approx(report::error_percent(700.0, 730.0)).epsilon(1e-12));
  CHECK(report::error_percent(250.0, 250.0) == 0.0);
  // a full-length miss is one hundred percent
  CHECK(report::error_percent(0.0, 1000.0) == 100.0);
}

TEST_CASE("eval rows recompute their error on restore", "[report]") {
  const auto row = report::EvalRow::make("x", "perfect", 100.0, 110.0);
  CHECK(row.error == Approx(1.0).epsilon(1e-12));
  CHECK_NOTHROW(report::EvalRow::restore("x", "perfect", 100.0, 110.0, row.error));
  CHECK_THROWS_AS(report::EvalRow::restore("x", "perfect", 100.0, 110.0, 2.5), ValidationError);
}

TEST_CASE("residual statistics", "[report]") {
  std::vector<report::EvalRow> sym = {
      report::EvalRow::make("a", "p", 100.0, 99.0),   // -1
      report::EvalRow::make("b", "p", 200.0, 201.0),  // +1
  };
  CHECK(report::residual_mean(sym) == 0.0);
  CHECK(report::residual_std(sym) == 1.0);
  CHECK(report::rmse_mm(sym) == 1.0);

  std::vector<report::EvalRow> constant = {
      report::EvalRow::make("a", "p", 100.0, 105.0),
      report::EvalRow::make("b", "p", 200.0, 205.0),
      report::EvalRow::make("c", "p", 300.0, 305.0),
  };
  CHECK(report::residual_std(constant) == 0.0);  // constant bias has no spread
  CHECK(report::rmse_mm(constant) == 5.0);

  CHECK_THROWS_AS(report::residual_std({report::EvalRow::make("a", "p", 1.0, 1.0)}), ContractError);
  CHECK_THROWS_AS(report::rmse_mm({}), ContractError);
}

TEST_CASE("rmse decomposes into spread and bias", "[report]") {
  support::TestRng rng(89);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<report::EvalRow> rows;
    const std::size_t n = static_cast<std::size_t>(rng.integer(2, 30));
    for (std::size_t i = 0; i < n; ++i) {
      const double real = rng.uniform(0.0, 1000.0);
      rows.push_back(report::EvalRow::make("r", "p", real, real + rng.uniform(-50.0, 80.0)));
    }
    const double std_mm = report::residual_std(rows);
    const double mean = report::residual_mean(rows);
    const double rmse = report::rmse_mm(rows);
    CHECK(rmse * rmse == Approx(std_mm * std_mm + mean * mean).epsilon(1e-10));
  }
}

TEST_CASE("worst rows sort by error with position tie-breaks", "[report]") {
  std::vector<report::EvalRow> rows = {
      report::EvalRow::make("small", "p", 500.0, 501.0),   // 0.1
      report::EvalRow::make("tie-b", "p", 700.0, 745.0),   // 4.5
      report::EvalRow::make("big", "p", 100.0, 151.0),     // 5.1
      report::EvalRow::make("tie-a", "p", 200.0, 245.0),   // 4.5
      report::EvalRow::make("mid", "p", 300.0, 346.0),     // 4.6
  };
  const auto worst = report::worst_k(rows, 4);
  REQUIRE(worst.size() == 4);
  CHECK(worst[0].label == "big");
  CHECK(worst[1].label == "mid");
  CHECK(worst[2].label == "tie-a");  // same error, smaller real position first
  CHECK(worst[3].label == "tie-b");

  CHECK(report::worst_k(rows, 5).size() == 5);
  CHECK_THROWS_AS(report::worst_k(rows, 6), ContractError);
  CHECK(report::worst_k(rows, 0).empty());
}

TEST_CASE("row CSV round trip", "[report]") {
  support::TempDir dir("rows");
  const auto rows = sample_rows();
  const std::string path = dir.file("rows.csv");
  report::save_rows(rows, path);
  const auto loaded = report::load_rows(path);
  REQUIRE(loaded.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(loaded[i].label == rows[i].label);
    CHECK(loaded[i].clamping == rows[i].clamping);
    CHECK(loaded[i].real_mm == rows[i].real_mm);
    CHECK(loaded[i].predicted_mm == rows[i].predicted_mm);
    CHECK(loaded[i].error == rows[i].error);
  }

  {
    std::ofstream out(dir.file("bad.csv"));
    out << "julia,set\n1,2\n";
  }
  CHECK_THROWS_AS(report::load_rows(dir.file("bad.csv")), ParseError);
}

TEST_CASE("scenario table splits rows into two columns", "[report]") {
  std::vector<report::EvalRow> rows;
  for (int i = 0; i < 26; ++i)
    rows.push_back(report::EvalRow::make("r" + std::to_string(i), "p", 50.0 * (i + 1), 50.0 * (i + 1) + i));

  const std::string csv_text = report::scenario_table_csv(rows);
  // 26 rows -> 13 data lines plus one header
  CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 14);

  const auto parsed = report::parse_scenario_table_csv(csv_text);
  REQUIRE(parsed.size() == 26);
  for (std::size_t i = 0; i < 26; ++i) {
    CHECK(parsed[i][0] == rows[i].real_mm);
    CHECK(parsed[i][1] == Approx(rows[i].predicted_mm).epsilon(0).margin(5e-4));
    CHECK(parsed[i][2] == Approx(rows[i].error).epsilon(0).margin(5e-4));
  }

  // odd row count leaves the final right-hand cell blank
  rows.pop_back();
  const std::string odd = report::scenario_table_csv(rows);
  CHECK(report::parse_scenario_table_csv(odd).size() == 25);
  CHECK(odd.find(",,\n") != std::string::npos);  // blank right-hand cell

  // text rendering puts both blocks on each line
  const std::string text = report::scenario_table_text(rows);
  CHECK(text.find("real") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 14);
}

TEST_CASE("scatter SVG plots one marker per row", "[report]") {
  const auto rows = sample_rows();
  const std::string svg = report::regression_scatter_svg(rows);
  CHECK(svg.rfind("<svg", 0) == 0);

  std::size_t circles = 0, pos = 0;
  while ((pos = svg.find("<circle", pos)) != std::string::npos) {
    ++circles;
    pos += 7;
  }
  CHECK(circles == rows.size());
  CHECK(svg.find("<line") != std::string::npos);  // identity reference line

  // deterministic output
  CHECK(report::regression_scatter_svg(rows) == svg);
  CHECK_THROWS_AS(report::regression_scatter_svg({}), ContractError);
}

TEST_CASE("trace SVG draws all four series", "[report]") {
  train::TrainTrace trace;
  for (long e = 0; e <= 5; ++e) {
    train::TraceRecord r;
    r.epoch = e;
    r.sat_train = 0.5 + 0.08 * static_cast<double>(e);
    r.sat_test = 0.45 + 0.08 * static_cast<double>(e);
    r.rmse_train = 0.3 / (1.0 + static_cast<double>(e));
    r.rmse_val = 0.35 / (1.0 + static_cast<double>(e));
    trace.records.push_back(r);
  }
  const std::string svg = report::trace_plot_svg(trace);
  std::size_t lines = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++lines;
    pos += 9;
  }
  CHECK(lines == 4);
  CHECK(svg.find("sat train") != std::string::npos);
  CHECK(svg.find("rmse val (scaled)") != std::string::npos);
  CHECK(report::trace_plot_svg(trace) == svg);

  train::TrainTrace empty;
  CHECK_THROWS_AS(report::trace_plot_svg(empty), ContractError);
}

TEST_CASE("report directory carries every artifact", "[report]") {
  support::TempDir dir("report");
  const auto rows = sample_rows();

  train::TrainTrace trace;
  for (long e = 0; e <= 3; ++e) {
    train::TraceRecord r;
    r.epoch = e;
    r.sat_train = 0.6 + 0.1 * static_cast<double>(e);
    r.sat_test = 0.55 + 0.1 * static_cast<double>(e);
    r.rmse_train = 0.2;
    r.rmse_val = 0.25;
    trace.records.push_back(r);
  }

  const auto bundle = report::write_report(dir.file("out"), rows, &trace);
  CHECK(bundle.rows.size() == rows.size());
  CHECK(bundle.rmse_mm == report::rmse_mm(rows));
  CHECK(bundle.residual_std_mm == report::residual_std(rows));
  REQUIRE(bundle.worst.size() == 4);

  for (const char* name : {"rows.csv", "summary.csv", "worst4.csv", "scatter.svg", "scenarios.csv",
                           "scenarios.txt", "trace.csv", "trace.svg"}) {
    const auto path = std::filesystem::path(dir.file("out")) / name;
    INFO(name);
    CHECK(std::filesystem::exists(path));
  }
  CHECK(bundle.artifacts.size() == 8);

  // the saved rows reload to the same statistics
  const auto reloaded = report::load_rows((std::filesystem::path(dir.file("out")) / "rows.csv").string());
  CHECK(report::rmse_mm(reloaded) == bundle.rmse_mm);

  // summary holds the same numbers it reports
  const std::string summary = slurp((std::filesystem::path(dir.file("out")) / "summary.csv").string());
  CHECK(summary.find(csv::format_double(bundle.residual_std_mm)) != std::string::npos);
  CHECK(summary.find(csv::format_double(bundle.rmse_mm)) != std::string::npos);

  // without a trace, no trace files appear
  const auto lean = report::write_report(dir.file("lean"), rows);
  CHECK(lean.artifacts.size() == 6);
  CHECK_FALSE(std::filesystem::exists(std::filesystem::path(dir.file("lean")) / "trace.svg"));

  CHECK_THROWS_AS(report::write_report(dir.file("none"), {}), ContractError);
}

TEST_CASE("report regeneration is byte-identical", "[report]") {
  support::TempDir dir("regen");
  const auto rows = sample_rows();
  report::write_report(dir.file("one"), rows);
  report::write_report(dir.file("two"), rows);
  for (const char* name : {"rows.csv", "summary.csv", "worst4.csv", "scatter.svg", "scenarios.csv",
                           "scenarios.txt"}) {
    INFO(name);
    CHECK(slurp((std::filesystem::path(dir.file("one")) / name).string()) ==
          slurp((std::filesystem::path(dir.file("two")) / name).string()));
  }
}
