#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lcnr/lcnr.hpp"

namespace fs = std::filesystem;
using namespace lcnr;

namespace {

constexpr const char* kVersion = "1.0.0";

// exit codes: 2 I/O, 3 configuration, 4 training divergence, 5 validation
enum ExitCode { kOk = 0, kIo = 2, kConfig = 3, kTraining = 4, kValidation = 5 };

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long seed = 42;
  bool seed_given = false;
  int jobs = 0;
  std::string predicate;
  double alpha = 0.0;
  bool alpha_given = false;
  double agg_p = 0.0;
  bool agg_p_given = false;
  double fraction = 0.0;
  bool fraction_given = false;
};

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

fs::path ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out is required for this command");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

class RunLog {
 public:
  RunLog(const fs::path& out_dir, const std::string& command) : path_(out_dir / "run.log"), command_(command) {
    start_ = std::chrono::steady_clock::now();
  }
  void note(const std::string& key, const std::string& value) { lines_.push_back(key + ": " + value); }
  // wall time makes this file inherently non-reproducible; everything else
  // written by a run is byte-deterministic
  void finish() {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::string text = "command: " + command_ + "\nversion: " + kVersion + "\n";
    for (const auto& l : lines_) text += l + "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "wall_time_s: %.3f\n", secs);
    text += buf;
    write_file(path_, text);
  }

 private:
  fs::path path_;
  std::string command_;
  std::vector<std::string> lines_;
  std::chrono::steady_clock::time_point start_;
};

config::Config load_config_or_empty(const std::string& path) {
  if (path.empty()) return config::Config{};
  return config::Config::from_file(path);
}

train::TrainConfig make_train_config(const CommonFlags& flags) {
  train::TrainConfig cfg = train::TrainConfig::from_config(load_config_or_empty(flags.config_path));
  if (flags.seed_given) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.predicate.empty()) cfg.predicate = logic::Predicate::named(flags.predicate);
  if (flags.alpha_given) cfg.predicate.alpha = flags.alpha;
  if (flags.agg_p_given) cfg.aggregator_p = flags.agg_p;
  if (flags.fraction_given) cfg.data_fraction = flags.fraction;
  cfg.validate();
  return cfg;
}

std::string describe_train_config(const train::TrainConfig& cfg) {
  std::string s;
  s += "epochs=" + std::to_string(cfg.epochs);
  s += " batch_size=" + std::to_string(cfg.batch_size);
  s += " learning_rate=" + csv::format_double(cfg.learning_rate);
  s += " predicate=" + cfg.predicate.describe();
  s += " agg_p=" + csv::format_double(cfg.aggregator_p);
  s += " seed=" + std::to_string(cfg.seed);
  s += " data_fraction=" + csv::format_double(cfg.data_fraction);
  s += " split_ratio=" + csv::format_double(cfg.split_ratio);
  s += " target=" + train::to_string(cfg.target_normalization);
  s += " architecture=" + cfg.make_architecture().to_string();
  return s;
}

std::vector<data::RfsSample> load_samples(const std::string& path) {
  if (path.empty()) throw ConfigError("--data is required for this command");
  data::LoadResult loaded = data::load_rfs_csv(path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  if (loaded.samples.empty()) throw ValidationError("'" + path + "' contains no usable RFS rows");
  return loaded.samples;
}

std::string clamping_label(double clamp_severity) {
  return clamp_severity == 0.0 ? "perfect" : "imperfect";
}

std::vector<report::EvalRow> rows_from_predictions(const std::vector<data::RfsSample>& samples,
                                                   const std::vector<double>& predictions,
                                                   const std::string& label_prefix) {
  std::vector<report::EvalRow> rows;
  rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    rows.push_back(report::EvalRow::make(label_prefix + std::to_string(i + 1),
                                         clamping_label(samples[i].scenario.clamp_severity),
                                         samples[i].scenario.crack_position_mm, predictions[i]));
  return rows;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonFlags& flags) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "gen-data");
  const config::Config raw = load_config_or_empty(flags.config_path);
  const data::GridSetup setup = data::grid_from_config(raw);
  const auto samples = data::generate_grid(setup.grid, setup.severity);
  const fs::path csv_path = out / "dataset.csv";
  data::save_csv(samples, csv_path.string());

  const std::string bytes = read_file_bytes(csv_path.string());
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(bytes)));

  std::string manifest;
  manifest += "rows: " + std::to_string(samples.size()) + "\n";
  manifest += "content_hash: " + std::string(hash) + "\n";
  manifest += "config:\n";
  for (const auto& [k, v] : raw.entries()) manifest += "  " + k + " = " + v + "\n";
  if (raw.entries().empty()) manifest += "  (defaults)\n";
  write_file(out / "manifest.txt", manifest);

  log.note("rows", std::to_string(samples.size()));
  log.note("content_hash", hash);
  log.finish();
  std::cout << "wrote " << samples.size() << " rows to " << csv_path.string() << " (hash " << hash << ")\n";
  return kOk;
}

int cmd_train(const CommonFlags& flags, const std::string& data_path) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "train");
  const train::TrainConfig cfg = make_train_config(flags);
  const auto samples = load_samples(data_path);
  const data::DatasetSplit split = data::split_shuffle(samples, cfg.split_ratio, cfg.seed);
  log.note("data", data_path);
  log.note("samples", std::to_string(samples.size()));
  log.note("config", describe_train_config(cfg));

  const train::TrainResult result = train::train(cfg, split);
  result.checkpoint.save((out / "model.ckpt").string());
  result.trace.save_csv((out / "trace.csv").string());
  write_file(out / "trace.svg", report::trace_plot_svg(result.trace));

  const train::TraceRecord& best = result.checkpoint.final_record;
  log.note("best_epoch", std::to_string(best.epoch));
  log.note("rmse_val", csv::format_double(best.rmse_val));
  log.finish();
  std::cout << "best epoch " << best.epoch << ": rmse_val " << csv::format_double(best.rmse_val) << ", sat_train "
            << csv::format_double(best.sat_train) << "\n"
            << "checkpoint: " << (out / "model.ckpt").string() << "\n";
  return kOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& fixtures_path, const std::string& model_path) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "evaluate");
  if (fixtures_path.empty()) throw ConfigError("--fixtures is required for evaluate");
  if (model_path.empty()) throw ConfigError("--model is required for evaluate");
  const train::Checkpoint ck = train::Checkpoint::load(model_path);
  data::LoadResult loaded = data::load_external_rfs(fixtures_path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  if (loaded.samples.empty()) throw ValidationError("'" + fixtures_path + "' contains no usable RFS rows");

  const std::vector<double> predictions = ck.predict_batch(loaded.samples);
  const auto rows = rows_from_predictions(loaded.samples, predictions, "scenario-");
  const report::ReportBundle bundle = report::write_report((out / "report").string(), rows);

  log.note("fixtures", fixtures_path);
  log.note("model", model_path);
  log.note("rows", std::to_string(rows.size()));
  log.note("residual_std_mm", csv::format_double(bundle.residual_std_mm));
  log.note("rmse_mm", csv::format_double(bundle.rmse_mm));
  log.finish();
  std::cout << "evaluated " << rows.size() << " scenarios: residual std " << csv::format_double(bundle.residual_std_mm)
            << " mm, rmse " << csv::format_double(bundle.rmse_mm) << " mm\n"
            << "report: " << (out / "report").string() << "\n";
  return kOk;
}

int cmd_kfold(const CommonFlags& flags, const std::string& data_path, int k) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "kfold");
  const train::TrainConfig cfg = make_train_config(flags);
  const auto samples = load_samples(data_path);
  const int jobs = flags.jobs > 0 ? flags.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  log.note("data", data_path);
  log.note("k", std::to_string(k));
  log.note("jobs", std::to_string(jobs));
  log.note("config", describe_train_config(cfg));

  const auto results = train::run_kfold(cfg, samples, k, jobs);

  csv::Writer summary((out / "kfold_summary.csv").string());
  summary.row({"fold", "held_out", "rmse_val_norm", "residual_std_mm"});
  for (const auto& fold : results) {
    const fs::path fold_dir = out / ("fold" + std::to_string(fold.fold));
    std::error_code ec;
    fs::create_directories(fold_dir, ec);
    if (ec) throw IoError("cannot create '" + fold_dir.string() + "': " + ec.message());
    fold.checkpoint.save((fold_dir / "model.ckpt").string());
    fold.trace.save_csv((fold_dir / "trace.csv").string());
    csv::Writer res((fold_dir / "residuals.csv").string());
    res.row({"sample_index", "real_mm", "predicted_mm", "residual_mm"});
    std::vector<report::EvalRow> rows;
    for (const auto& r : fold.residuals) {
      res.row({std::to_string(r.sample_index), csv::format_double(r.real_mm), csv::format_double(r.predicted_mm),
               csv::format_double(r.predicted_mm - r.real_mm)});
      rows.push_back(report::EvalRow::make(std::to_string(r.sample_index), "", r.real_mm, r.predicted_mm));
    }
    res.close();
    summary.row({std::to_string(fold.fold), std::to_string(fold.residuals.size()),
                 csv::format_double(fold.checkpoint.final_record.rmse_val),
                 csv::format_double(report::residual_std(rows))});
  }
  summary.close();
  log.finish();
  std::cout << "k-fold complete: " << results.size() << " folds under " << out.string() << "\n";
  return kOk;
}

int cmd_fractions(const CommonFlags& flags, const std::string& data_path, std::string fractions_arg) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "fractions");
  const train::TrainConfig cfg = make_train_config(flags);
  const auto samples = load_samples(data_path);

  std::vector<double> fractions;
  if (fractions_arg.empty()) {
    for (int i = 1; i <= 9; ++i) fractions.push_back(i / 10.0);
  } else {
    for (const auto& cell : csv::split_row(fractions_arg)) fractions.push_back(csv::parse_double(cell));
  }
  log.note("data", data_path);
  log.note("config", describe_train_config(cfg));

  const auto rows = train::data_fraction_experiment(cfg, samples, fractions, cfg.split_ratio);
  csv::Writer table((out / "fractions.csv").string());
  table.row({"fraction", "rmse_val", "final_sat"});
  for (const auto& r : rows)
    table.row({csv::format_double(r.fraction), csv::format_double(r.rmse_val), csv::format_double(r.final_sat)});
  table.close();
  log.finish();
  for (const auto& r : rows)
    std::cout << "fraction " << csv::format_double(r.fraction) << ": rmse_val " << csv::format_double(r.rmse_val)
              << ", final sat " << csv::format_double(r.final_sat) << "\n";
  return kOk;
}

int cmd_predict(const std::string& model_path, const std::string& rfs_arg) {
  if (model_path.empty()) throw ConfigError("--model is required for predict");
  if (rfs_arg.empty()) throw ConfigError("--rfs is required for predict");
  const train::Checkpoint ck = train::Checkpoint::load(model_path);
  std::vector<double> rfs;
  for (const auto& cell : csv::split_row(rfs_arg)) rfs.push_back(csv::parse_double(cell));
  const double mm = ck.predict_mm(rfs);
  std::printf("%.3f\n", mm);
  return kOk;
}

int cmd_query(const CommonFlags& flags, const std::string& data_path, const std::string& model_path,
              const std::string& formula_text) {
  if (model_path.empty()) throw ConfigError("--model is required for query");
  if (formula_text.empty()) throw ConfigError("--formula is required for query");
  const train::Checkpoint ck = train::Checkpoint::load(model_path);
  const auto samples = load_samples(data_path);

  logic::Predicate pred = ck.config.predicate;  // match training unless overridden
  if (!flags.predicate.empty()) pred = logic::Predicate::named(flags.predicate);
  if (flags.alpha_given) pred.alpha = flags.alpha;
  const double agg_p = flags.agg_p_given ? flags.agg_p : ck.config.aggregator_p;

  const logic::Formula formula = logic::parse_formula(formula_text, agg_p);

  // ground the diag variables as (features, normalized targets) and every
  // function symbol as the checkpointed regressor
  const nn::Model model = ck.build_model();
  logic::Grounding ground;
  ground.variables[formula.forall().var_x] = ck.normalizer.features(samples);
  ground.variables[formula.forall().var_y] = ck.normalizer.targets(samples);
  const std::function<void(const logic::FormulaNode&)> collect = [&](const logic::FormulaNode& node) {
    if (node.kind == logic::FormulaNode::Kind::predicate_app) {
      ground.predicates[node.predicate_name] = pred;
      for (const logic::Term* term : {&node.lhs, &node.rhs})
        if (term->is_application)
          ground.functions[term->symbol] = [&model](ad::Graph& g, ad::NodeRef in) {
            return model.bind_forward(g, in).output;
          };
    }
    for (const auto& child : node.children) collect(*child);
  };
  collect(*formula.forall().children[0]);

  const logic::QueryReport rep = logic::query(formula, ground);
  std::cout << csv::format_double(rep.truth) << "\n";
  std::cerr << "pairs: " << rep.pair_truths.size() << ", fraction with truth >= 0.9: "
            << csv::format_double(rep.fraction_at_least(0.9)) << "\n";

  if (!flags.out_dir.empty()) {
    const fs::path out = ensure_out_dir(flags.out_dir);
    RunLog log(out, "query");
    csv::Writer pairs((out / "pair_truths.csv").string());
    pairs.row({"pair", "truth"});
    for (std::size_t i = 0; i < rep.pair_truths.size(); ++i)
      pairs.row({std::to_string(i + 1), csv::format_double(rep.pair_truths[i])});
    pairs.close();
    log.note("data", data_path);
    log.note("model", model_path);
    log.note("formula", formula_text);
    log.note("truth", csv::format_double(rep.truth));
    log.finish();
  }
  return kOk;
}

int cmd_report(const CommonFlags& flags) {
  const fs::path out = ensure_out_dir(flags.out_dir);
  RunLog log(out, "report");
  const fs::path report_dir = out / "report";
  const fs::path rows_path =
      fs::exists(report_dir / "rows.csv") ? report_dir / "rows.csv" : out / "rows.csv";
  if (!fs::exists(rows_path)) throw IoError("no rows.csv under '" + out.string() + "'");
  const auto rows = report::load_rows(rows_path.string());

  train::TrainTrace trace;
  bool have_trace = false;
  for (const fs::path candidate : {out / "trace.csv", report_dir / "trace.csv"}) {
    if (fs::exists(candidate)) {
      trace = train::TrainTrace::load_csv(candidate.string());
      have_trace = true;
      break;
    }
  }
  const report::ReportBundle bundle =
      report::write_report(report_dir.string(), rows, have_trace ? &trace : nullptr);
  log.note("rows", std::to_string(rows.size()));
  log.note("residual_std_mm", csv::format_double(bundle.residual_std_mm));
  log.finish();
  std::cout << "regenerated report for " << rows.size() << " rows under " << report_dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crack-position regression toolkit: RFS dataset synthesis, logic-trained Conv1D regression, "
               "evaluation reports"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags flags;
  std::string data_path, fixtures_path, model_path, rfs_arg, formula_text, fractions_arg;
  int k = 5;

  const auto add_common = [&](CLI::App* sub, bool with_train_flags) {
    sub->add_option("--config", flags.config_path, "key = value config file");
    sub->add_option("--out", flags.out_dir, "output directory");
    sub->add_option("--seed", flags.seed, "master seed; every random stream derives from it")
        ->each([&](const std::string&) { flags.seed_given = true; });
    if (with_train_flags) {
      sub->add_option("--jobs", flags.jobs, "parallel workers (default: logical cores)");
      sub->add_option("--predicate", flags.predicate, "euclidean|manhattan|minkowski1|minkowski2")
          ->check(CLI::IsMember({"euclidean", "manhattan", "minkowski1", "minkowski2"}));
      sub->add_option("--alpha", flags.alpha, "similarity scale a in exp(-a*d) or 1/(1+a*d)")
          ->each([&](const std::string&) { flags.alpha_given = true; });
      sub->add_option("--agg-p", flags.agg_p, "pMeanError exponent")
          ->each([&](const std::string&) { flags.agg_p_given = true; });
      sub->add_option("--fraction", flags.fraction, "training-data fraction in (0,1]")
          ->each([&](const std::string&) { flags.fraction_given = true; });
    }
  };

  CLI::App* gen = app.add_subcommand("gen-data", "synthesize the damage-scenario RFS dataset");
  add_common(gen, false);

  CLI::App* tr = app.add_subcommand("train", "train the logic-driven Conv1D regressor");
  add_common(tr, true);
  tr->add_option("--data", data_path, "dataset CSV from gen-data");

  CLI::App* ev = app.add_subcommand("evaluate", "predict fixture scenarios and write the report directory");
  add_common(ev, false);
  ev->add_option("--fixtures", fixtures_path, "fixture CSV (FEM or experimental RFS rows)");
  ev->add_option("--model", model_path, "checkpoint from train");

  CLI::App* kf = app.add_subcommand("kfold", "k-fold cross-validation with per-fold residuals");
  add_common(kf, true);
  kf->add_option("--data", data_path, "dataset CSV");
  kf->add_option("--k", k, "number of folds");

  CLI::App* fr = app.add_subcommand("fractions", "train on growing data fractions and tabulate accuracy");
  add_common(fr, true);
  fr->add_option("--data", data_path, "dataset CSV");
  fr->add_option("--fractions", fractions_arg, "comma-separated fractions (default 0.1..0.9)");

  CLI::App* pr = app.add_subcommand("predict", "predict the crack position for one RFS vector");
  pr->add_option("--model", model_path, "checkpoint from train");
  pr->add_option("--rfs", rfs_arg, "8 comma-separated RFS values");

  CLI::App* qu = app.add_subcommand("query", "evaluate a logic formula over a dataset and model");
  add_common(qu, true);
  qu->add_option("--data", data_path, "dataset CSV to ground the diag variables");
  qu->add_option("--model", model_path, "checkpoint providing the function symbol");
  qu->add_option("--formula", formula_text, "e.g. \"forall diag(x,y): eq(F(x), y)\"");

  CLI::App* rp = app.add_subcommand("report", "regenerate report artifacts from rows.csv (and trace.csv)");
  add_common(rp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags);
    if (tr->parsed()) return cmd_train(flags, data_path);
    if (ev->parsed()) return cmd_evaluate(flags, fixtures_path, model_path);
    if (kf->parsed()) return cmd_kfold(flags, data_path, k);
    if (fr->parsed()) return cmd_fractions(flags, data_path, fractions_arg);
    if (pr->parsed()) return cmd_predict(model_path, rfs_arg);
    if (qu->parsed()) return cmd_query(flags, data_path, model_path, formula_text);
    if (rp->parsed()) return cmd_report(flags);
    throw ContractError("no subcommand dispatched");
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
}
