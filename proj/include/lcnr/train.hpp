#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lcnr/config.hpp"
#include "lcnr/csv.hpp"
#include "lcnr/dataset.hpp"
#include "lcnr/errors.hpp"
#include "lcnr/logic.hpp"
#include "lcnr/nn.hpp"
#include "lcnr/rng.hpp"
#include "lcnr/tensor.hpp"

namespace lcnr::train {

enum class TargetNorm { unit_length, raw_mm };
enum class LossKind { satisfiability, mse };
enum class BaselineKind { conv1d_mse, dnn_mse };

inline std::string to_string(TargetNorm t) { return t == TargetNorm::unit_length ? "unit-length" : "raw-mm"; }
inline TargetNorm target_norm_from_string(std::string_view s) {
  if (s == "unit-length") return TargetNorm::unit_length;
  if (s == "raw-mm") return TargetNorm::raw_mm;
  throw ConfigError("target_normalization must be unit-length or raw-mm, got '" + std::string(s) + "'");
}

// Min-max feature scaling fitted on the training split; targets divide by the
// beam length in unit-length mode.
struct Normalizer {
  std::vector<double> feature_min = std::vector<double>(data::kModeCount, 0.0);
  std::vector<double> feature_max = std::vector<double>(data::kModeCount, 1.0);
  TargetNorm target = TargetNorm::unit_length;

  void fit(const std::vector<data::RfsSample>& samples) {
    if (samples.empty()) throw ContractError("normalizer: empty fit set");
    feature_min.assign(data::kModeCount, std::numeric_limits<double>::infinity());
    feature_max.assign(data::kModeCount, -std::numeric_limits<double>::infinity());
    for (const auto& s : samples)
      for (int m = 0; m < data::kModeCount; ++m) {
        const double v = s.rfs[static_cast<std::size_t>(m)];
        feature_min[static_cast<std::size_t>(m)] = std::min(feature_min[static_cast<std::size_t>(m)], v);
        feature_max[static_cast<std::size_t>(m)] = std::max(feature_max[static_cast<std::size_t>(m)], v);
      }
  }

  std::vector<double> transform(const data::RfsVector& rfs) const {
    std::vector<double> out(data::kModeCount);
    for (int m = 0; m < data::kModeCount; ++m) {
      const auto i = static_cast<std::size_t>(m);
      const double span = feature_max[i] - feature_min[i];
      out[i] = span > 0.0 ? (rfs[i] - feature_min[i]) / span : 0.0;
    }
    return out;
  }

  ad::Tensor features(const std::vector<data::RfsSample>& samples) const {
    ad::Tensor out = ad::Tensor::zeros({samples.size(), static_cast<std::size_t>(data::kModeCount)});
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const auto row = transform(samples[b].rfs);
      std::copy(row.begin(), row.end(), out.data.begin() + static_cast<long>(b * row.size()));
    }
    return out;
  }

  double normalize_target(double mm) const {
    return target == TargetNorm::unit_length ? mm / data::kBeamLengthMm : mm;
  }
  double denormalize_target(double v) const {
    return target == TargetNorm::unit_length ? v * data::kBeamLengthMm : v;
  }

  ad::Tensor targets(const std::vector<data::RfsSample>& samples) const {
    ad::Tensor out = ad::Tensor::zeros({samples.size(), 1});
    for (std::size_t b = 0; b < samples.size(); ++b)
      out.data[b] = normalize_target(samples[b].scenario.crack_position_mm);
    return out;
  }
};

struct TrainConfig {
  long epochs = 200;
  long batch_size = 64;
  double learning_rate = 1.5e-3;
  double lr_decay = 0.985;  // per-epoch multiplicative factor; 1 keeps the rate constant
  logic::Predicate predicate{};
  double aggregator_p = 2.0;
  std::uint64_t seed = 42;
  double data_fraction = 1.0;
  std::string architecture;  // empty -> built-in convolutional regressor
  TargetNorm target_normalization = TargetNorm::unit_length;
  long patience = 0;  // 0 disables early stopping
  double split_ratio = 0.7;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0,1]");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw ConfigError("data_fraction must lie in (0,1]");
    if (aggregator_p < 1.0) throw ConfigError("agg_p must be >= 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0,1)");
    predicate.validate();
  }

  nn::Architecture make_architecture() const {
    return architecture.empty() ? nn::lcnr_default() : nn::Architecture::parse(architecture);
  }

  static TrainConfig from_config(const config::Config& c) {
    TrainConfig t;
    for (const auto& [key, value] : c.entries()) {
      if (key == "epochs") t.epochs = c.get_long(key, t.epochs);
      else if (key == "batch_size") t.batch_size = c.get_long(key, t.batch_size);
      else if (key == "learning_rate") t.learning_rate = c.get_double(key, t.learning_rate);
      else if (key == "lr_decay") t.lr_decay = c.get_double(key, t.lr_decay);
      else if (key == "predicate") t.predicate = logic::Predicate::named(value);
      else if (key == "alpha" || key == "transform" || key == "minkowski_p") continue;  // applied below
      else if (key == "agg_p") t.aggregator_p = c.get_double(key, t.aggregator_p);
      else if (key == "seed") t.seed = static_cast<std::uint64_t>(c.get_long(key, 42));
      else if (key == "data_fraction") t.data_fraction = c.get_double(key, t.data_fraction);
      else if (key == "architecture") t.architecture = value;
      else if (key == "target_normalization") t.target_normalization = target_norm_from_string(value);
      else if (key == "patience") t.patience = c.get_long(key, t.patience);
      else if (key == "split_ratio") t.split_ratio = c.get_double(key, t.split_ratio);
      else throw ConfigError("unknown training config key '" + key + "'");
    }
    if (c.has("alpha")) t.predicate.alpha = c.get_double("alpha", t.predicate.alpha);
    if (c.has("minkowski_p")) t.predicate.minkowski_p = c.get_double("minkowski_p", t.predicate.minkowski_p);
    if (c.has("transform")) {
      const std::string tr = c.require_string("transform");
      if (tr == "exp_neg") t.predicate.transform = logic::Transform::exp_neg;
      else if (tr == "inverse") t.predicate.transform = logic::Transform::inverse;
      else throw ConfigError("transform must be exp_neg or inverse, got '" + tr + "'");
    }
    t.validate();
    return t;
  }
};

struct TraceRecord {
  long epoch = 0;
  double sat_train = 0.0;
  double sat_test = 0.0;
  double rmse_train = 0.0;
  double rmse_val = 0.0;
};

struct TrainTrace {
  // record 0 holds the untrained baseline; records 1..E one per completed epoch
  std::vector<TraceRecord> records;

  void save_csv(const std::string& path) const {
    csv::Writer out(path);
    out.row({"epoch", "sat_train", "sat_test", "rmse_train", "rmse_val"});
    for (const auto& r : records)
      out.row({std::to_string(r.epoch), csv::format_double(r.sat_train), csv::format_double(r.sat_test),
               csv::format_double(r.rmse_train), csv::format_double(r.rmse_val)});
    out.close();
  }

  static TrainTrace load_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::vector<std::string> expect = {"epoch", "sat_train", "sat_test", "rmse_train", "rmse_val"};
    if (table.header != expect) throw ParseError(path + ": unexpected trace header", 1);
    TrainTrace trace;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      const long line = table.row_lines[i];
      if (row.size() != 5) throw ParseError(path + ": trace rows need 5 columns", line);
      TraceRecord r;
      r.epoch = csv::parse_long(row[0], line);
      r.sat_train = csv::parse_double(row[1], line);
      r.sat_test = csv::parse_double(row[2], line);
      r.rmse_train = csv::parse_double(row[3], line);
      r.rmse_val = csv::parse_double(row[4], line);
      trace.records.push_back(r);
    }
    return trace;
  }
};

// ---------------------------------------------------------------------------
// Axiom construction: forall diag(x,y): eq(F(x), y)

struct Axiom {
  nn::Model::Bound bound;
  ad::NodeRef pair_truths;
  ad::NodeRef satisfiability;
};

inline Axiom build_axiom(ad::Graph& g, const nn::Model& model, const ad::Tensor& x, const ad::Tensor& y,
                         const logic::Predicate& predicate, double aggregator_p) {
  if (x.shape[0] != y.shape[0])
    throw ShapeError("axiom: feature batch " + std::to_string(x.shape[0]) + " vs target batch " +
                     std::to_string(y.shape[0]));
  Axiom axiom;
  ad::NodeRef xn = g.input(x);
  ad::NodeRef yn = g.input(y);
  axiom.bound = model.bind_forward(g, xn);
  axiom.pair_truths = logic::eq_truth(predicate, axiom.bound.output, yn);
  axiom.satisfiability = logic::p_mean_error(axiom.pair_truths, aggregator_p);
  return axiom;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct Checkpoint {
  std::string architecture;
  std::vector<double> parameters;
  Normalizer normalizer;
  TrainConfig config;
  LossKind loss = LossKind::satisfiability;
  TraceRecord final_record;

  nn::Model build_model() const {
    nn::Model model{nn::Architecture::parse(architecture)};
    model.load_parameters(parameters);
    return model;
  }

  double predict_mm(const std::vector<double>& rfs) const {
    if (rfs.size() != static_cast<std::size_t>(data::kModeCount))
      throw ValidationError("predict: need " + std::to_string(data::kModeCount) + " RFS values, got " +
                            std::to_string(rfs.size()));
    data::RfsVector v{};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(rfs[i] >= 0.0 && rfs[i] < 1.0))
        throw ValidationError("predict: rfs entry " + std::to_string(i + 1) + " = " + csv::format_double(rfs[i]) +
                              " outside [0,1)");
      v[i] = rfs[i];
    }
    const nn::Model model = build_model();
    const auto row = normalizer.transform(v);
    ad::Tensor x({1, v.size()}, std::vector<double>(row.begin(), row.end()));
    return normalizer.denormalize_target(model.predict(x).data[0]);
  }

  std::vector<double> predict_batch(const std::vector<data::RfsSample>& samples) const {
    if (samples.empty()) return {};
    const nn::Model model = build_model();
    const ad::Tensor out = model.predict(normalizer.features(samples));
    std::vector<double> mm(out.data.size());
    for (std::size_t i = 0; i < mm.size(); ++i) mm[i] = normalizer.denormalize_target(out.data[i]);
    return mm;
  }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

namespace detail {

inline std::string distance_name(logic::DistanceKind k) {
  switch (k) {
    case logic::DistanceKind::euclidean: return "euclidean";
    case logic::DistanceKind::manhattan: return "manhattan";
    case logic::DistanceKind::minkowski: return "minkowski";
  }
  throw ContractError("unknown distance kind");
}
inline logic::DistanceKind distance_from_name(const std::string& s) {
  if (s == "euclidean") return logic::DistanceKind::euclidean;
  if (s == "manhattan") return logic::DistanceKind::manhattan;
  if (s == "minkowski") return logic::DistanceKind::minkowski;
  throw ValidationError("checkpoint: unknown distance kind '" + s + "'");
}

}  // namespace detail

inline void Checkpoint::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["format"] = "lcnr-checkpoint";
  j["version"] = 1;
  j["architecture"] = architecture;
  j["loss"] = loss == LossKind::satisfiability ? "satisfiability" : "mse";
  j["parameters"] = parameters;
  j["normalizer"] = {{"feature_min", normalizer.feature_min},
                     {"feature_max", normalizer.feature_max},
                     {"target", to_string(normalizer.target)}};
  j["train_config"] = {{"epochs", config.epochs},
                       {"batch_size", config.batch_size},
                       {"learning_rate", config.learning_rate},
                       {"lr_decay", config.lr_decay},
                       {"distance", detail::distance_name(config.predicate.distance)},
                       {"minkowski_p", config.predicate.minkowski_p},
                       {"transform", config.predicate.transform == logic::Transform::exp_neg ? "exp_neg" : "inverse"},
                       {"alpha", config.predicate.alpha},
                       {"agg_p", config.aggregator_p},
                       {"seed", config.seed},
                       {"data_fraction", config.data_fraction},
                       {"architecture", config.architecture},
                       {"target_normalization", to_string(config.target_normalization)},
                       {"patience", config.patience},
                       {"split_ratio", config.split_ratio}};
  j["final_record"] = {{"epoch", final_record.epoch},
                       {"sat_train", final_record.sat_train},
                       {"sat_test", final_record.sat_test},
                       {"rmse_train", final_record.rmse_train},
                       {"rmse_val", final_record.rmse_val}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format") != "lcnr-checkpoint") throw ValidationError("not a checkpoint file: " + path);
    Checkpoint ck;
    ck.architecture = j.at("architecture").get<std::string>();
    ck.loss = j.at("loss") == "mse" ? LossKind::mse : LossKind::satisfiability;
    ck.parameters = j.at("parameters").get<std::vector<double>>();
    const auto& n = j.at("normalizer");
    ck.normalizer.feature_min = n.at("feature_min").get<std::vector<double>>();
    ck.normalizer.feature_max = n.at("feature_max").get<std::vector<double>>();
    ck.normalizer.target = target_norm_from_string(n.at("target").get<std::string>());
    const auto& tc = j.at("train_config");
    ck.config.epochs = tc.at("epochs").get<long>();
    ck.config.batch_size = tc.at("batch_size").get<long>();
    ck.config.learning_rate = tc.at("learning_rate").get<double>();
    ck.config.lr_decay = tc.at("lr_decay").get<double>();
    ck.config.predicate.distance = detail::distance_from_name(tc.at("distance").get<std::string>());
    ck.config.predicate.minkowski_p = tc.at("minkowski_p").get<double>();
    ck.config.predicate.transform =
        tc.at("transform") == "inverse" ? logic::Transform::inverse : logic::Transform::exp_neg;
    ck.config.predicate.alpha = tc.at("alpha").get<double>();
    ck.config.aggregator_p = tc.at("agg_p").get<double>();
    ck.config.seed = tc.at("seed").get<std::uint64_t>();
    ck.config.data_fraction = tc.at("data_fraction").get<double>();
    ck.config.architecture = tc.at("architecture").get<std::string>();
    ck.config.target_normalization = target_norm_from_string(tc.at("target_normalization").get<std::string>());
    ck.config.patience = tc.at("patience").get<long>();
    ck.config.split_ratio = tc.at("split_ratio").get<double>();
    const auto& fr = j.at("final_record");
    ck.final_record.epoch = fr.at("epoch").get<long>();
    ck.final_record.sat_train = fr.at("sat_train").get<double>();
    ck.final_record.sat_test = fr.at("sat_test").get<double>();
    ck.final_record.rmse_train = fr.at("rmse_train").get<double>();
    ck.final_record.rmse_val = fr.at("rmse_val").get<double>();
    if (ck.parameters.size() != nn::Architecture::parse(ck.architecture).parameter_count())
      throw ValidationError("checkpoint '" + path + "': parameter count does not match architecture");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is malformed: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  Checkpoint checkpoint;
  TrainTrace trace;
};

namespace detail {

inline double rmse_of(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) throw ContractError("rmse: length mismatch or empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Satisfiability of the axiom over precomputed normalized predictions.
// Shares graph arithmetic with training batches, so logged values equal a
// full formula evaluation bit for bit.
inline double satisfiability_of(const std::vector<double>& pred_norm, const std::vector<double>& target_norm,
                                const logic::Predicate& predicate, double aggregator_p) {
  ad::Graph g;
  ad::NodeRef u = g.input(ad::Tensor({pred_norm.size(), 1}, pred_norm));
  ad::NodeRef v = g.input(ad::Tensor({target_norm.size(), 1}, target_norm));
  return logic::p_mean_error(logic::eq_truth(predicate, u, v), aggregator_p).value().item();
}

struct EvalSet {
  ad::Tensor features;               // [N,8]
  std::vector<double> target_norm;   // normalized positions
};

inline EvalSet make_eval_set(const Normalizer& norm, const std::vector<data::RfsSample>& samples) {
  EvalSet set;
  set.features = norm.features(samples);
  set.target_norm.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    set.target_norm[i] = norm.normalize_target(samples[i].scenario.crack_position_mm);
  return set;
}

inline std::vector<double> predict_norm(const nn::Model& model, const EvalSet& set) {
  return model.predict(set.features).data;
}

// A run that pushes activations past double range must fail as a training
// error, not trip the logic layer's [0,1] contract on garbage truths.
inline void guard_finite_predictions(const std::vector<double>& pred, long epoch) {
  for (double v : pred)
    if (!std::isfinite(v)) throw TrainingError("predictions became non-finite", epoch);
}

inline TraceRecord metrics(long epoch, const nn::Model& model, const EvalSet& train_set, const EvalSet& test_set,
                           const logic::Predicate& predicate, double aggregator_p) {
  TraceRecord r;
  r.epoch = epoch;
  const auto pred_train = predict_norm(model, train_set);
  const auto pred_test = predict_norm(model, test_set);
  guard_finite_predictions(pred_train, epoch);
  guard_finite_predictions(pred_test, epoch);
  r.sat_train = satisfiability_of(pred_train, train_set.target_norm, predicate, aggregator_p);
  r.sat_test = satisfiability_of(pred_test, test_set.target_norm, predicate, aggregator_p);
  r.rmse_train = rmse_of(pred_train, train_set.target_norm);
  r.rmse_val = rmse_of(pred_test, test_set.target_norm);
  return r;
}

inline std::vector<data::RfsSample> subsample(const std::vector<data::RfsSample>& in, double fraction,
                                              std::uint64_t seed) {
  if (fraction >= 1.0) return in;
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(in.size()))));
  rng::Engine engine(rng::derive_seed(seed, "fraction-sub"));
  const auto perm = engine.permutation(in.size());
  std::vector<data::RfsSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(in[perm[i]]);
  return out;
}

inline TrainResult train_impl(const TrainConfig& config, const data::DatasetSplit& split,
                              const nn::Architecture& arch, LossKind loss_kind) {
  config.validate();
  if (split.train.empty() || split.test.empty()) throw ContractError("training needs nonempty train and test sets");

  const std::vector<data::RfsSample> train_samples =
      subsample(split.train, config.data_fraction, config.seed);

  Normalizer norm;
  norm.target = config.target_normalization;
  norm.fit(train_samples);

  const EvalSet train_set = make_eval_set(norm, train_samples);
  const EvalSet test_set = make_eval_set(norm, split.test);

  nn::Model model(arch);
  rng::Engine init_engine(rng::derive_seed(config.seed, "init"));
  model.init_glorot(init_engine);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = config.learning_rate;
  nn::AdamState adam(model.parameters(), adam_cfg);

  TrainTrace trace;
  trace.records.push_back(metrics(0, model, train_set, test_set, config.predicate, config.aggregator_p));

  const std::size_t n = train_samples.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<double> best_params = model.flatten_parameters();
  TraceRecord best_record = trace.records.front();
  double best_val = best_record.rmse_val;
  long since_best = 0;

  for (long epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.set_lr(config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch - 1)));
    rng::Engine shuffle_engine(rng::derive_seed(config.seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
    const auto perm = shuffle_engine.permutation(n);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t size = std::min(batch, n - start);
      ad::Tensor xb = ad::Tensor::zeros({size, static_cast<std::size_t>(data::kModeCount)});
      ad::Tensor yb = ad::Tensor::zeros({size, 1});
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t src = perm[start + i];
        std::copy(train_set.features.data.begin() + static_cast<long>(src * data::kModeCount),
                  train_set.features.data.begin() + static_cast<long>((src + 1) * data::kModeCount),
                  xb.data.begin() + static_cast<long>(i * data::kModeCount));
        yb.data[i] = train_set.target_norm[src];
      }

      ad::Graph g;
      double loss_value;
      nn::Model::Bound bound;
      if (loss_kind == LossKind::satisfiability) {
        ad::NodeRef xn = g.input(xb);
        ad::NodeRef yn = g.input(yb);
        bound = model.bind_forward(g, xn);
        guard_finite_predictions(bound.output.value().data, epoch);
        ad::NodeRef pair_truths = logic::eq_truth(config.predicate, bound.output, yn);
        ad::NodeRef satisfiability = logic::p_mean_error(pair_truths, config.aggregator_p);
        // the power mean never exceeds its largest input
        double max_truth = 0.0;
        for (double t : pair_truths.value().data) max_truth = std::max(max_truth, t);
        if (satisfiability.value().item() > max_truth + 1e-9)
          throw ContractError("satisfiability exceeds the best per-pair truth");
        ad::NodeRef loss = ad::affine(satisfiability, -1.0, 1.0);
        loss_value = loss.value().item();
        g.backward(loss);
      } else {
        ad::NodeRef xn = g.input(xb);
        bound = model.bind_forward(g, xn);
        ad::NodeRef yn = g.input(yb);
        ad::NodeRef diff = ad::sub(bound.output, yn);
        ad::NodeRef loss = ad::mean_all(ad::mul(diff, diff));
        loss_value = loss.value().item();
        g.backward(loss);
      }
      if (!std::isfinite(loss_value))
        throw TrainingError("loss became non-finite", epoch);

      std::vector<const ad::Tensor*> grads;
      grads.reserve(bound.params.size());
      for (const ad::NodeRef& p : bound.params) grads.push_back(&g.node(p.id).grad);
      adam.step(model.parameters(), grads);
    }

    for (const ad::Tensor* p : model.parameters())
      for (double v : p->data)
        if (!std::isfinite(v)) throw TrainingError("parameters became non-finite", epoch);

    TraceRecord record = metrics(epoch, model, train_set, test_set, config.predicate, config.aggregator_p);
    trace.records.push_back(record);

    if (record.rmse_val < best_val) {
      best_val = record.rmse_val;
      best_params = model.flatten_parameters();
      best_record = record;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }

  Checkpoint ck;
  ck.architecture = arch.to_string();
  ck.parameters = std::move(best_params);
  ck.normalizer = norm;
  ck.config = config;
  ck.loss = loss_kind;
  ck.final_record = best_record;
  return TrainResult{std::move(ck), std::move(trace)};
}

}  // namespace detail

inline TrainResult train(const TrainConfig& config, const data::DatasetSplit& split) {
  return detail::train_impl(config, split, config.make_architecture(), LossKind::satisfiability);
}

inline TrainResult train_baseline(const TrainConfig& config, const data::DatasetSplit& split, BaselineKind kind) {
  const nn::Architecture arch = kind == BaselineKind::conv1d_mse ? config.make_architecture() : nn::dnn_baseline();
  return detail::train_impl(config, split, arch, LossKind::mse);
}

// ---------------------------------------------------------------------------
// Experiments

struct FoldResidual {
  std::size_t sample_index = 0;  // index into the caller's sample vector
  double real_mm = 0.0;
  double predicted_mm = 0.0;
};

struct FoldResult {
  int fold = 0;
  Checkpoint checkpoint;
  TrainTrace trace;
  std::vector<FoldResidual> residuals;
};

inline std::vector<FoldResult> run_kfold(const TrainConfig& config, const std::vector<data::RfsSample>& samples,
                                         int k, int jobs = 1) {
  config.validate();
  const data::FoldPlan plan = data::make_kfold(samples.size(), k, config.seed);
  data::reference_modes();  // touch lazily built tables before spawning workers
  std::vector<FoldResult> results(static_cast<std::size_t>(k));

  std::atomic<int> next_fold{0};
  auto worker = [&]() {
    while (true) {
      const int fold = next_fold.fetch_add(1);
      if (fold >= k) return;
      data::DatasetSplit split;
      split.seed = config.seed;
      const auto held = plan.fold_members(fold);
      std::vector<char> in_fold(samples.size(), 0);
      for (std::size_t idx : held) in_fold[idx] = 1;
      for (std::size_t i = 0; i < samples.size(); ++i)
        (in_fold[i] ? split.test : split.train).push_back(samples[i]);
      TrainConfig fold_cfg = config;
      fold_cfg.seed = rng::derive_seed(config.seed, "fold", static_cast<std::uint64_t>(fold));
      TrainResult r = detail::train_impl(fold_cfg, split, fold_cfg.make_architecture(), LossKind::satisfiability);
      FoldResult out;
      out.fold = fold;
      out.trace = std::move(r.trace);
      const std::vector<double> pred = r.checkpoint.predict_batch(split.test);
      out.residuals.reserve(held.size());
      for (std::size_t i = 0; i < held.size(); ++i)
        out.residuals.push_back(
            FoldResidual{held[i], samples[held[i]].scenario.crack_position_mm, pred[i]});
      out.checkpoint = std::move(r.checkpoint);
      results[static_cast<std::size_t>(fold)] = std::move(out);
    }
  };

  const int n_workers = std::max(1, std::min(jobs, k));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return results;
}

struct FractionRow {
  double fraction = 0.0;
  double rmse_val = 0.0;
  double final_sat = 0.0;
};

inline std::vector<FractionRow> data_fraction_experiment(const TrainConfig& config,
                                                         const std::vector<data::RfsSample>& samples,
                                                         const std::vector<double>& fractions,
                                                         double split_ratio = 0.7) {
  config.validate();
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0,1]");
  const data::DatasetSplit split = data::split_shuffle(samples, split_ratio, config.seed);
  std::vector<FractionRow> rows;
  rows.reserve(fractions.size());
  for (double f : fractions) {
    TrainConfig cfg = config;
    cfg.data_fraction = f;
    const TrainResult r = train(cfg, split);
    FractionRow row;
    row.fraction = f;
    row.rmse_val = r.checkpoint.final_record.rmse_val;
    row.final_sat = r.trace.records.back().sat_train;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lcnr::train
