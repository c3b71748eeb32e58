#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcnr/lcnr.hpp"
#include "support.hpp"

using namespace lcnr;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

// Runs the installed binary with the given argument string, capturing exit
// code and both streams through scratch files.
CliResult run_cli(const support::TempDir& scratch, const std::string& args) {
  static std::atomic<unsigned> counter{0};
  const unsigned id = counter.fetch_add(1);
  const std::string out_path = scratch.file("stdout-" + std::to_string(id) + ".txt");
  const std::string err_path = scratch.file("stderr-" + std::to_string(id) + ".txt");
  const std::string cmd =
      std::string(LCNR_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult result;
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  result.exit_code = WEXITSTATUS(raw);
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// 36-row grid: 6 positions x 3 depths x (perfect + one clamp severity).
const char* kTinyGridConfig =
    "position_stop_mm = 100\n"
    "position_step_mm = 20\n"
    "depth_start = 0.2\n"
    "depth_stop = 0.6\n"
    "depth_step = 0.2\n"
    "clamp_depth_ratios = 0.2\n";

std::string make_tiny_dataset(const support::TempDir& dir) {
  const std::string cfg = dir.file("grid.cfg");
  write_text(cfg, kTinyGridConfig);
  const std::string out = dir.file("gen");
  CliResult r = run_cli(dir, "gen-data --config " + cfg + " --out " + out);
  REQUIRE(r.exit_code == 0);
  return out + "/dataset.csv";
}

std::string rfs_csv_arg(const data::RfsSample& sample) {
  std::string arg;
  for (double v : sample.rfs) {
    if (!arg.empty()) arg += ",";
    arg += csv::format_double(v);
  }
  return arg;
}

}  // namespace

TEST_CASE("cli accepts help and version, rejects bad invocations", "[cli]") {
  support::TempDir dir("cli-args");

  CliResult help = run_cli(dir, "--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("gen-data") != std::string::npos);
  CHECK(help.out.find("train") != std::string::npos);

  CliResult version = run_cli(dir, "--version");
  CHECK(version.exit_code == 0);
  CHECK(version.out.find("1.0.0") != std::string::npos);

  CHECK(run_cli(dir, "").exit_code == 3);                            // subcommand required
  CHECK(run_cli(dir, "train --no-such-flag 1").exit_code == 3);      // unknown option
  CHECK(run_cli(dir, "train --predicate chebyshev").exit_code == 3); // outside the menu
}

TEST_CASE("cli gen-data writes a deterministic dataset with manifest", "[cli]") {
  support::TempDir dir("cli-gen");
  const std::string cfg = dir.file("grid.cfg");
  write_text(cfg, kTinyGridConfig);

  CliResult first = run_cli(dir, "gen-data --config " + cfg + " --out " + dir.file("a"));
  REQUIRE(first.exit_code == 0);
  CHECK(first.out.find("wrote 36 rows") != std::string::npos);
  REQUIRE(fs::exists(dir.file("a") + "/dataset.csv"));
  REQUIRE(fs::exists(dir.file("a") + "/manifest.txt"));
  REQUIRE(fs::exists(dir.file("a") + "/run.log"));

  const std::string manifest = slurp(dir.file("a") + "/manifest.txt");
  CHECK(manifest.find("rows: 36") != std::string::npos);
  CHECK(manifest.find("position_step_mm = 20") != std::string::npos);

  // the advertised hash is the FNV-1a digest of the file bytes
  const std::string bytes = slurp(dir.file("a") + "/dataset.csv");
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(bytes)));
  CHECK(manifest.find(std::string("content_hash: ") + hash) != std::string::npos);

  data::LoadResult loaded = data::load_rfs_csv(dir.file("a") + "/dataset.csv");
  REQUIRE(loaded.samples.size() == 36);
  CHECK(loaded.samples.front().scenario.perfect_clamping());
  CHECK(loaded.samples.front().scenario.crack_position_mm == 0.0);
  CHECK(loaded.samples.front().scenario.crack_depth_ratio == Approx(0.2));

  CliResult second = run_cli(dir, "gen-data --config " + cfg + " --out " + dir.file("b"));
  REQUIRE(second.exit_code == 0);
  CHECK(slurp(dir.file("b") + "/dataset.csv") == bytes);
}

TEST_CASE("cli gen-data reports configuration and io failures", "[cli]") {
  support::TempDir dir("cli-gen-err");

  const std::string bad = dir.file("bad.cfg");
  write_text(bad, "bogus_key = 1\n");
  CliResult unknown = run_cli(dir, "gen-data --config " + bad + " --out " + dir.file("x"));
  CHECK(unknown.exit_code == 3);
  CHECK(unknown.err.find("unknown dataset config key") != std::string::npos);

  CHECK(run_cli(dir, "gen-data").exit_code == 3);  // --out is mandatory

  CliResult missing =
      run_cli(dir, "gen-data --config " + dir.file("absent.cfg") + " --out " + dir.file("y"));
  CHECK(missing.exit_code == 2);
}

TEST_CASE("cli pipeline: train, evaluate, predict, query, report", "[cli]") {
  support::TempDir dir("cli-pipeline");
  const std::string dataset = make_tiny_dataset(dir);

  // --- train ---------------------------------------------------------------
  const std::string train_cfg = dir.file("train.cfg");
  write_text(train_cfg, "epochs = 3\nbatch_size = 16\n");
  const std::string train_dir = dir.file("trained");
  CliResult tr = run_cli(dir, "train --config " + train_cfg + " --data " + dataset +
                                  " --out " + train_dir + " --seed 7");
  REQUIRE(tr.exit_code == 0);
  CHECK(tr.out.find("best epoch") != std::string::npos);
  const std::string ckpt = train_dir + "/model.ckpt";
  REQUIRE(fs::exists(ckpt));
  REQUIRE(fs::exists(train_dir + "/trace.csv"));
  REQUIRE(fs::exists(train_dir + "/trace.svg"));

  const train::TrainTrace trace = train::TrainTrace::load_csv(train_dir + "/trace.csv");
  REQUIRE(trace.records.size() == 4);  // untrained baseline + three epochs
  CHECK(trace.records.front().epoch == 0);

  const train::Checkpoint ck = train::Checkpoint::load(ckpt);
  CHECK(ck.config.epochs == 3);
  CHECK(ck.config.seed == 7);  // --seed wins over the config file default

  CHECK(run_cli(dir, "train --out " + dir.file("no-data")).exit_code == 3);
  CHECK(run_cli(dir, "train --data " + dir.file("ghost.csv") + " --out " +
                         dir.file("no-file")).exit_code == 2);

  // --- evaluate fixture scenarios -------------------------------------------
  const std::string fixtures = std::string(LCNR_FIXTURES_DIR) + "/experimental_table5.csv";
  const std::string eval_dir = dir.file("eval");
  CliResult ev = run_cli(dir, "evaluate --fixtures " + fixtures + " --model " + ckpt +
                                  " --out " + eval_dir);
  REQUIRE(ev.exit_code == 0);
  CHECK(ev.out.find("evaluated 6 scenarios") != std::string::npos);
  for (const char* name :
       {"rows.csv", "summary.csv", "worst4.csv", "scatter.svg", "scenarios.csv", "scenarios.txt"})
    REQUIRE(fs::exists(eval_dir + "/report/" + name));

  const auto rows = report::load_rows(eval_dir + "/report/rows.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows.front().label == "scenario-1");
  CHECK(rows.front().real_mm == 98.0);
  CHECK(rows.back().clamping == "imperfect");

  CHECK(run_cli(dir, "evaluate --fixtures " + fixtures + " --out " + dir.file("e2")).exit_code == 3);
  CHECK(run_cli(dir, "evaluate --fixtures " + fixtures + " --model " + dir.file("ghost.ckpt") +
                         " --out " + dir.file("e3")).exit_code == 2);

  // --- predict one vector ----------------------------------------------------
  data::LoadResult fixture_rows = data::load_rfs_csv(fixtures);
  REQUIRE(fixture_rows.samples.size() == 6);
  const std::string rfs = rfs_csv_arg(fixture_rows.samples.front());
  CliResult pr = run_cli(dir, "predict --model " + ckpt + " --rfs " + rfs);
  REQUIRE(pr.exit_code == 0);
  const double printed = std::stod(pr.out);
  const double direct = ck.predict_mm(std::vector<double>(fixture_rows.samples.front().rfs.begin(),
                                                          fixture_rows.samples.front().rfs.end()));
  CHECK(printed == Approx(direct).margin(5e-4));  // %.3f rounding

  CHECK(run_cli(dir, "predict --model " + ckpt + " --rfs 0.1,0.2").exit_code == 5);
  CHECK(run_cli(dir, "predict --model " + ckpt + " --rfs 2,0,0,0,0,0,0,0").exit_code == 5);
  CHECK(run_cli(dir, "predict --model " + ckpt).exit_code == 3);

  // --- query the training axiom ----------------------------------------------
  CliResult qu = run_cli(dir, "query --model " + ckpt + " --data " + dataset +
                                  " --formula 'forall diag(x,y): eq(F(x), y)'");
  REQUIRE(qu.exit_code == 0);
  const double truth = std::stod(qu.out);
  CHECK(truth >= 0.0);
  CHECK(truth <= 1.0);
  CHECK(qu.err.find("pairs: 36") != std::string::npos);

  CliResult qu_again = run_cli(dir, "query --model " + ckpt + " --data " + dataset +
                                        " --formula 'forall diag(x,y): eq(F(x), y)'");
  CHECK(qu_again.out == qu.out);  // deterministic evaluation

  CHECK(run_cli(dir, "query --model " + ckpt + " --data " + dataset +
                         " --formula 'eq(F(x), y)'").exit_code == 5);  // quantifier required
  CHECK(run_cli(dir, "query --model " + ckpt + " --data " + dataset +
                         " --formula 'forall diag(x,y): eq(F(x), q)'").exit_code == 5);  // unbound name

  // --- regenerate the report in place ----------------------------------------
  const std::string summary_before = slurp(eval_dir + "/report/summary.csv");
  const std::string scatter_before = slurp(eval_dir + "/report/scatter.svg");
  CliResult rp = run_cli(dir, "report --out " + eval_dir);
  REQUIRE(rp.exit_code == 0);
  CHECK(slurp(eval_dir + "/report/summary.csv") == summary_before);
  CHECK(slurp(eval_dir + "/report/scatter.svg") == scatter_before);

  CHECK(run_cli(dir, "report --out " + dir.file("empty-report")).exit_code == 2);
}

TEST_CASE("cli train exits with the training-failure code on divergence", "[cli]") {
  support::TempDir dir("cli-diverge");
  const std::string dataset = make_tiny_dataset(dir);
  const std::string cfg = dir.file("explode.cfg");
  write_text(cfg, "epochs = 2\nlearning_rate = 1e80\n");
  CliResult r = run_cli(dir, "train --config " + cfg + " --data " + dataset + " --out " +
                                 dir.file("boom"));
  CHECK(r.exit_code == 4);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("cli kfold partitions every sample exactly once", "[cli]") {
  support::TempDir dir("cli-kfold");
  const std::string dataset = make_tiny_dataset(dir);
  const std::string cfg = dir.file("quick.cfg");
  write_text(cfg, "epochs = 2\nbatch_size = 16\n");
  const std::string out = dir.file("folds");
  CliResult r = run_cli(dir, "kfold --config " + cfg + " --data " + dataset + " --k 3 --jobs 1 --out " + out);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(out + "/kfold_summary.csv"));

  std::multiset<long> held_out;
  for (int fold = 0; fold < 3; ++fold) {
    const std::string res_path = out + "/fold" + std::to_string(fold) + "/residuals.csv";
    REQUIRE(fs::exists(res_path));
    std::ifstream in(res_path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "sample_index,real_mm,predicted_mm,residual_mm");
    long count = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      held_out.insert(std::stol(line.substr(0, line.find(','))));
      ++count;
    }
    CHECK(count == 12);
  }
  REQUIRE(held_out.size() == 36);
  for (long i = 0; i < 36; ++i) CHECK(held_out.count(i) == 1);
}

TEST_CASE("cli fractions tabulates accuracy per training share", "[cli]") {
  support::TempDir dir("cli-fractions");
  const std::string dataset = make_tiny_dataset(dir);
  const std::string cfg = dir.file("quick.cfg");
  write_text(cfg, "epochs = 2\nbatch_size = 16\n");
  const std::string out = dir.file("sweep");
  CliResult r = run_cli(dir, "fractions --config " + cfg + " --data " + dataset +
                                 " --fractions 0.5,1 --out " + out);
  REQUIRE(r.exit_code == 0);
  const std::string table = slurp(out + "/fractions.csv");
  std::istringstream lines(table);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "fraction,rmse_val,final_sat");
  std::getline(lines, line);
  CHECK(line.rfind("0.5,", 0) == 0);
  std::getline(lines, line);
  CHECK(line.rfind("1,", 0) == 0);
  CHECK(r.out.find("fraction 0.5: rmse_val") != std::string::npos);
}
