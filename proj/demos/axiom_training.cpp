// Minimal end-to-end run: synthesize data, train the regressor by maximizing
// the satisfiability of `forall diag(x,y): eq(F(x), y)`, then query the
// trained axiom.

#include <cstdio>

#include "lcnr/lcnr.hpp"

using namespace lcnr;

int main() {
  data::GridConfig grid;
  grid.position_step_mm = 10.0;  // 101 positions x 16 depths x 2 clamp states
  grid.clamp_depth_ratios = {0.15};
  const auto samples = data::generate_grid(grid);
  const data::DatasetSplit split = data::split_shuffle(samples, 0.7, 7);
  std::printf("dataset: %zu samples (%zu train / %zu test)\n", samples.size(), split.train.size(),
              split.test.size());

  train::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 7;
  cfg.predicate = logic::Predicate::named("euclidean");

  const train::TrainResult result = train::train(cfg, split);
  for (const auto& r : result.trace.records)
    if (r.epoch % 10 == 0)
      std::printf("epoch %3ld: sat_train %.4f, sat_test %.4f, rmse_val %.4f\n", r.epoch, r.sat_train, r.sat_test,
                  r.rmse_val);

  const train::Checkpoint& ck = result.checkpoint;
  std::printf("best epoch %ld with validation RMSE %.4f (unit-normalized)\n", ck.final_record.epoch,
              ck.final_record.rmse_val);

  // the trained axiom, evaluated through the logic layer
  const nn::Model model = ck.build_model();
  logic::Formula formula = logic::parse_formula("forall diag(x,y): eq(F(x), y)", cfg.aggregator_p);
  logic::Grounding ground;
  ground.variables["x"] = ck.normalizer.features(split.test);
  ground.variables["y"] = ck.normalizer.targets(split.test);
  ground.predicates["eq"] = cfg.predicate;
  ground.functions["F"] = [&model](ad::Graph& g, ad::NodeRef in) { return model.bind_forward(g, in).output; };
  const logic::QueryReport rep = logic::query(formula, ground);
  std::printf("axiom satisfiability on the test split: %.4f (%.0f%% of pairs above 0.9)\n", rep.truth,
              100.0 * rep.fraction_at_least(0.9));

  // single-scenario prediction
  const auto rfs = data::rfs_perfect(beam::SeverityModel::reference().severity(0.5), 98.0);
  const double mm = ck.predict_mm(std::vector<double>(rfs.begin(), rfs.end()));
  std::printf("crack synthesized at 98 mm predicted at %.1f mm\n", mm);
  return 0;
}
