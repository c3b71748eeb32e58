#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcnr/beam.hpp"
#include "lcnr/config.hpp"
#include "lcnr/csv.hpp"
#include "lcnr/errors.hpp"
#include "lcnr/rng.hpp"

namespace lcnr::data {

inline constexpr int kModeCount = 8;
inline constexpr double kBeamLengthMm = 1000.0;

using RfsVector = std::array<double, kModeCount>;

enum class Source { analytic, fem, experimental };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::analytic: return "analytic";
    case Source::fem: return "fem";
    case Source::experimental: return "experimental";
  }
  throw ContractError("unknown source");
}

inline Source source_from_string(std::string_view s, long line = -1) {
  if (s == "analytic") return Source::analytic;
  if (s == "fem") return Source::fem;
  if (s == "experimental") return Source::experimental;
  throw ParseError("unknown source '" + std::string(s) + "'", line);
}

// One crack + clamping configuration. Positions are millimeters from the
// fixed end at the I/O surface; curvature evaluation converts to the
// dimensionless position internally.
struct DamageScenario {
  double clamp_severity = 0.0;     // gamma_1, 0 = perfect clamping
  double crack_position_mm = 0.0;  // x in [0, 1000]
  double crack_depth_ratio = 0.0;  // a/H
  double crack_severity = 0.0;     // gamma_2

  bool perfect_clamping() const { return clamp_severity == 0.0; }
};

struct RfsSample {
  DamageScenario scenario;
  RfsVector rfs{};
  Source source = Source::analytic;
};

// Precomputed mode table for the reference beam; every RFS synthesis
// reuses it.
inline const std::vector<beam::ModeBasis>& reference_modes() {
  static const std::vector<beam::ModeBasis> modes = beam::mode_basis(beam::BeamSpec::reference(), kModeCount);
  return modes;
}

inline void check_position_mm(double x_mm) {
  if (x_mm < 0.0 || x_mm > kBeamLengthMm)
    throw DomainError("crack position " + csv::format_double(x_mm) + " mm outside [0, 1000]");
}

// Relative frequency shifts for a perfectly clamped beam:
// rfs_i = gamma_2 * [phi''_i(x)]^2.
inline RfsVector rfs_perfect(double crack_severity, double x_mm,
                             const std::vector<beam::ModeBasis>& modes = reference_modes()) {
  if (crack_severity < 0.0 || crack_severity >= 1.0) throw DomainError("crack severity must be in [0,1)");
  check_position_mm(x_mm);
  RfsVector out{};
  const double ratio = x_mm / kBeamLengthMm;
  for (int i = 0; i < kModeCount; ++i)
    out[static_cast<std::size_t>(i)] = crack_severity * beam::normalized_curvature_sq(modes[static_cast<std::size_t>(i)], ratio);
  return out;
}

// Imperfect clamping adds a uniform severity to every mode:
// rfs_i = gamma_1 + gamma_2 * [phi''_i(x)]^2.
inline RfsVector rfs_imperfect(double clamp_severity, double crack_severity, double x_mm,
                               const std::vector<beam::ModeBasis>& modes = reference_modes()) {
  if (clamp_severity < 0.0 || clamp_severity >= 1.0) throw DomainError("clamp severity must be in [0,1)");
  if (clamp_severity + crack_severity >= 1.0) throw DomainError("combined severity must stay below 1");
  RfsVector out = rfs_perfect(crack_severity, x_mm, modes);
  for (double& v : out) v += clamp_severity;
  return out;
}

inline RfsVector synthesize(const DamageScenario& sc, const std::vector<beam::ModeBasis>& modes = reference_modes()) {
  return sc.perfect_clamping() ? rfs_perfect(sc.crack_severity, sc.crack_position_mm, modes)
                               : rfs_imperfect(sc.clamp_severity, sc.crack_severity, sc.crack_position_mm, modes);
}

// Scenario grid: Cartesian product of clamping state x crack position x
// crack depth, clamping-major ordering.
struct GridConfig {
  double position_start_mm = 0.0;
  double position_stop_mm = 1000.0;
  double position_step_mm = 2.0;
  double depth_start = 0.04;
  double depth_stop = 0.64;
  double depth_step = 0.04;
  // depth ratios of the clamp-side crack; severity comes from the model.
  std::vector<double> clamp_depth_ratios = {0.10, 0.4 / 3.0, 0.5 / 3.0, 0.20};
  bool include_perfect = true;

  std::vector<double> positions_mm() const {
    return axis(position_start_mm, position_stop_mm, position_step_mm, "position");
  }
  std::vector<double> depth_ratios() const { return axis(depth_start, depth_stop, depth_step, "depth"); }

  std::vector<double> clamp_severities(const beam::SeverityModel& model) const {
    std::vector<double> out;
    if (include_perfect) out.push_back(0.0);
    for (double d : clamp_depth_ratios) out.push_back(model.severity(d));
    return out;
  }

 private:
  static std::vector<double> axis(double start, double stop, double step, const char* name) {
    if (step <= 0.0) throw ConfigError(std::string(name) + " step must be positive");
    if (stop < start) throw ConfigError(std::string(name) + " axis is empty");
    std::vector<double> out;
    const long count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) out.push_back(start + static_cast<double>(k) * step);
    // start + (count-1)*step can land an ulp past stop; a caller asking for
    // stop deserves exactly stop, and downstream severity lookup refuses to
    // extrapolate past its anchors.
    if (std::abs(out.back() - stop) <= 1e-9 * std::max(1.0, std::abs(stop))) out.back() = stop;
    return out;
  }
};

struct GridSetup {
  GridConfig grid;
  beam::SeverityModel severity = beam::SeverityModel::reference();
};

inline GridSetup grid_from_config(const config::Config& c) {
  GridSetup setup;
  GridConfig& g = setup.grid;
  beam::InterpolationKind kind = beam::InterpolationKind::monotone_cubic;
  std::string anchors_file;
  for (const auto& [key, value] : c.entries()) {
    if (key == "position_start_mm") g.position_start_mm = c.get_double(key, g.position_start_mm);
    else if (key == "position_stop_mm") g.position_stop_mm = c.get_double(key, g.position_stop_mm);
    else if (key == "position_step_mm") g.position_step_mm = c.get_double(key, g.position_step_mm);
    else if (key == "depth_start") g.depth_start = c.get_double(key, g.depth_start);
    else if (key == "depth_stop") g.depth_stop = c.get_double(key, g.depth_stop);
    else if (key == "depth_step") g.depth_step = c.get_double(key, g.depth_step);
    else if (key == "clamp_depth_ratios") g.clamp_depth_ratios = c.get_double_list(key, g.clamp_depth_ratios);
    else if (key == "include_perfect") g.include_perfect = c.get_long(key, 1) != 0;
    else if (key == "severity_anchors_file") anchors_file = value;
    else if (key == "interpolation") {
      if (value == "monotone-cubic") kind = beam::InterpolationKind::monotone_cubic;
      else if (value == "linear") kind = beam::InterpolationKind::linear;
      else throw ConfigError("interpolation must be monotone-cubic or linear, got '" + value + "'");
    } else {
      throw ConfigError("unknown dataset config key '" + key + "'");
    }
  }
  if (!anchors_file.empty())
    setup.severity = beam::SeverityModel::from_file(anchors_file, kind);
  else if (kind != beam::InterpolationKind::monotone_cubic)
    setup.severity = beam::SeverityModel(beam::SeverityModel::reference().anchors(), kind);
  return setup;
}

inline std::vector<RfsSample> generate_grid(const GridConfig& cfg,
                                            const beam::SeverityModel& model = beam::SeverityModel::reference()) {
  const auto positions = cfg.positions_mm();
  const auto depths = cfg.depth_ratios();
  const auto clamps = cfg.clamp_severities(model);
  if (positions.empty() || depths.empty() || clamps.empty())
    throw ConfigError("generate_grid: every axis needs at least one value");
  const auto& modes = reference_modes();
  std::vector<RfsSample> samples;
  samples.reserve(positions.size() * depths.size() * clamps.size());
  for (double g1 : clamps)
    for (double x : positions)
      for (double depth : depths) {
        RfsSample s;
        s.scenario.clamp_severity = g1;
        s.scenario.crack_position_mm = x;
        s.scenario.crack_depth_ratio = depth;
        s.scenario.crack_severity = model.severity(depth);
        s.rfs = synthesize(s.scenario, modes);
        s.source = Source::analytic;
        samples.push_back(s);
      }
  return samples;
}

struct DatasetSplit {
  std::vector<RfsSample> train;
  std::vector<RfsSample> test;
  std::uint64_t seed = 0;
  double ratio = 0.7;
};

// Seeded uniform shuffle followed by a prefix split.
inline DatasetSplit split_shuffle(const std::vector<RfsSample>& samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be inside (0,1)");
  if (samples.size() < 10) throw ConfigError("split needs at least 10 samples");
  rng::Engine engine(rng::derive_seed(seed, "split"));
  const auto perm = engine.permutation(samples.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(samples.size())));
  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train.reserve(n_train);
  split.test.reserve(samples.size() - n_train);
  for (std::size_t i = 0; i < perm.size(); ++i)
    (i < n_train ? split.train : split.test).push_back(samples[perm[i]]);
  return split;
}

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // sample index -> fold id

  std::vector<std::size_t> fold_members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
};

// Balanced partition after a seeded shuffle; fold sizes differ by at most 1.
inline FoldPlan make_kfold(std::size_t sample_count, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > sample_count)
    throw ConfigError("k must be in [2, sample count], got k=" + std::to_string(k) + " for " +
                      std::to_string(sample_count) + " samples");
  rng::Engine engine(rng::derive_seed(seed, "kfold"));
  const auto perm = engine.permutation(sample_count);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.assign(sample_count, 0);
  const std::size_t base = sample_count / static_cast<std::size_t>(k);
  const std::size_t extra = sample_count % static_cast<std::size_t>(k);
  std::size_t cursor = 0;
  for (int fold = 0; fold < k; ++fold) {
    const std::size_t size = base + (static_cast<std::size_t>(fold) < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) plan.fold_of[perm[cursor++]] = fold;
  }
  return plan;
}

// Zero-mean gaussian perturbation with sigma relative to the largest RFS
// entry of the dataset, clamped back into [0,1).
inline std::vector<RfsSample> add_noise(std::vector<RfsSample> samples, double sigma_rel, std::uint64_t seed) {
  if (sigma_rel < 0.0) throw ConfigError("noise sigma must be nonnegative");
  if (sigma_rel == 0.0 || samples.empty()) return samples;
  double max_entry = 0.0;
  for (const auto& s : samples)
    for (double v : s.rfs) max_entry = std::max(max_entry, v);
  const double sigma = sigma_rel * max_entry;
  rng::Engine engine(rng::derive_seed(seed, "noise"));
  constexpr double kUpper = 0.9999999999999999;  // largest double below 1
  for (auto& s : samples)
    for (double& v : s.rfs) v = std::clamp(v + sigma * engine.next_gaussian(), 0.0, kUpper);
  return samples;
}

// ---------------------------------------------------------------------------
// CSV surface

inline const std::vector<std::string>& dataset_header() {
  static const std::vector<std::string> header = {
      "scenario_id", "clamp_severity", "crack_x_mm",  "crack_depth_ratio", "crack_severity",
      "rfs_m1",      "rfs_m2",         "rfs_m3",      "rfs_m4",            "rfs_m5",
      "rfs_m6",      "rfs_m7",         "rfs_m8",      "source"};
  return header;
}

inline void save_csv(const std::vector<RfsSample>& samples, const std::string& path) {
  csv::Writer out(path);
  out.row(dataset_header());
  long id = 1;
  for (const auto& s : samples) {
    std::vector<std::string> row;
    row.reserve(14);
    row.push_back(std::to_string(id++));
    row.push_back(csv::format_double(s.scenario.clamp_severity));
    row.push_back(csv::format_double(s.scenario.crack_position_mm));
    row.push_back(csv::format_double(s.scenario.crack_depth_ratio));
    row.push_back(csv::format_double(s.scenario.crack_severity));
    for (double v : s.rfs) row.push_back(csv::format_double(v));
    row.push_back(to_string(s.source));
    out.row(row);
  }
  out.close();
}

struct LoadResult {
  std::vector<RfsSample> samples;
  // rows whose RFS cells are all empty -- scenario definitions awaiting
  // measured values (e.g. position-only FEM tables)
  std::vector<DamageScenario> scenario_only;
  std::vector<std::string> warnings;
};

inline LoadResult load_rfs_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  LoadResult result;
  if (table.header.empty()) {
    result.warnings.push_back(path + ": empty file");
    return result;
  }
  if (table.header != dataset_header())
    throw ParseError(path + ": unexpected header; expected scenario_id,clamp_severity,crack_x_mm,..." , 1);
  if (table.rows.empty()) result.warnings.push_back(path + ": no data rows");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long line = table.row_lines[r];
    if (row.size() != dataset_header().size())
      throw ParseError(path + ": expected " + std::to_string(dataset_header().size()) + " columns, got " +
                           std::to_string(row.size()),
                       line);
    DamageScenario sc;
    sc.clamp_severity = csv::parse_double(row[1], line);
    sc.crack_position_mm = csv::parse_double(row[2], line);
    sc.crack_depth_ratio = csv::parse_double(row[3], line);
    sc.crack_severity = csv::parse_double(row[4], line);
    if (sc.clamp_severity < 0.0 || sc.clamp_severity >= 1.0)
      throw ValidationError(path + ":" + std::to_string(line) + ": clamp severity outside [0,1)");
    if (sc.crack_position_mm < 0.0 || sc.crack_position_mm > kBeamLengthMm)
      throw ValidationError(path + ":" + std::to_string(line) + ": crack position outside [0,1000] mm");
    const Source source = source_from_string(row[13], line);

    bool all_empty = true;
    bool any_empty = false;
    for (int m = 0; m < kModeCount; ++m) {
      if (row[static_cast<std::size_t>(5 + m)].empty())
        any_empty = true;
      else
        all_empty = false;
    }
    if (all_empty) {
      result.scenario_only.push_back(sc);
      continue;
    }
    if (any_empty) throw ParseError(path + ": RFS row must be fully present or fully empty", line);
    RfsSample s;
    s.scenario = sc;
    s.source = source;
    for (int m = 0; m < kModeCount; ++m) {
      const double v = csv::parse_double(row[static_cast<std::size_t>(5 + m)], line);
      if (v < 0.0 || v >= 1.0)
        throw ValidationError(path + ":" + std::to_string(line) + ": rfs_m" + std::to_string(m + 1) +
                              " outside [0,1)");
      s.rfs[static_cast<std::size_t>(m)] = v;
    }
    result.samples.push_back(s);
  }
  return result;
}

// External measurement files (FEM, experimental); same schema.
inline LoadResult load_external_rfs(const std::string& path) { return load_rfs_csv(path); }

}  // namespace lcnr::data