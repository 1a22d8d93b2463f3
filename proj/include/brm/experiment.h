// Copyright (c) the BRM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRM_EXPERIMENT_H_
#define BRM_EXPERIMENT_H_

// Experiment harness: configuration, corpus runs of both pipelines, the
// delta-grid monotonicity sweep, the exhaustive oracle and report files.
//
// Config file (YAML, every key optional):
//
//   config_version: 1
//   corpus_dir: corpus            # relative to the config file
//   output_dir: brm_out           # relative to the config file
//   tolerance: 0.10
//   methods: both                 # baseline | proposed | both
//   targets: [0.06, 0.12, 0.25, 0.5, 0.75]
//   models:
//     - {beta_train: 0.002, delta_min: 0.1, delta_max: 2.0, gain_scale: 0.002}
//   search: {refit: anchor_min, binary_max_iters: 32, loglinear_max_iters: 10}
//   oracle_grid: 512
//   sweep_points: 32
//   seed: 1
//   synthetic_curves: 100
//   workers: 1

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brm/bd_metrics.h"
#include "brm/brm.h"
#include "brm/codec.h"
#include "brm/rate_curve.h"

namespace brm {

inline constexpr int kConfigVersion = 1;

struct ModelSpec {
  double beta_train = 0.0;
  double delta_min = 0.0;
  double delta_max = 0.0;
  double gain_scale = 0.0;
};

enum class MethodSet { kBaseline, kProposed, kBoth };

struct ExperimentConfig {
  int config_version = kConfigVersion;
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path output_dir = "brm_out";
  std::vector<ModelSpec> models;
  std::vector<double> targets;
  double tolerance = 0.10;
  MethodSet methods = MethodSet::kBoth;
  BrmConfig search;
  int oracle_grid = kOracleGrid;
  int sweep_points = 32;
  uint64_t seed = 1;
  int synthetic_curves = 100;
  int workers = 1;

  std::vector<Method> methodList() const;
  std::vector<CodecModel> codecModels() const;
};

// Four models (beta_train 0.002 / 0.007 / 0.015 / 0.05 with delta ranges
// [0.1, 2], [0.3, 1.4], [0.4, 2], [0.6, 6]), five targets, tolerance 0.10.
ExperimentConfig default_config();

// Throws ConfigError naming the violated invariant.
void validate_config(const ExperimentConfig& config);

// Throws ParseError (with line) on malformed YAML or wrongly typed values,
// ConfigError on unknown keys or invariant violations. Relative paths are
// resolved against base_dir.
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct CorpusImage {
  std::string name;
  std::shared_ptr<const Image> image;  // null when loading failed
  std::string error;
};

// All .pgm/.ppm/.pnm files in the directory, sorted by name. Unreadable
// files are kept with an error; a missing or empty directory throws.
std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir);

struct ResultRow {
  std::string image;
  double target_bpp = 0.0;
  Method method = Method::kProposed;
  int model_id = 0;
  double beta_test = 0.0;
  double delta_beta = 0.0;
  double bpp_achieved = 0.0;
  double bit_diff_percent = 0.0;
  bool matched = false;
  Outcome outcome = Outcome::kExhausted;
  CostUnits cost;
  std::size_t candidates = 0;
  std::size_t matched_candidates = 0;
  // Quality of the final reconstruction; not charged to the BRM cost.
  double psnr_db = 0.0;
  std::string error;
  std::string trace;
};

struct MethodSummary {
  Method method = Method::kProposed;
  std::size_t rows = 0;
  std::size_t errors = 0;
  double matched_fraction = 0.0;
  double mean_bit_diff_percent = 0.0;
  CostUnits cost;
  // Per target: mean achieved bpp and mean PSNR over the images.
  std::optional<RdCurve> rd_curve;
};

struct RunReport {
  std::vector<ResultRow> rows;
  std::vector<MethodSummary> methods;
  // Proposed against baseline on the averaged RD curves, when both ran.
  std::optional<BdResult> bd_rate;
  // Proposed over baseline total entropy evaluations, when both ran.
  std::optional<double> probe_ratio;
  double wall_seconds = 0.0;
};

RunReport run_experiment(const ExperimentConfig& config);

// Builds summaries from rows (used by run_experiment; exposed for tests).
void summarize(RunReport& report, const std::vector<double>& targets);

// BD-rate of method `test` against `anchor` from their averaged RD curves.
std::optional<BdResult> strategy_bd_rate(const RunReport& report, Method anchor, Method test);

// Writes results.csv, summary.json, curves/<method>.csv and trace.log.
void emit_report(const RunReport& report, const std::filesystem::path& output_dir);

struct SweepRow {
  std::string image;
  int model_id = 0;
  double delta = 0.0;
  double beta = 0.0;
  RateDistortionPoint point;
};

struct SweepViolation {
  std::string image;
  int model_id = 0;
  std::string what;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepViolation> violations;
};

// Geometric delta grid over every image x model: bpp must increase strictly
// (ties allowed only at zero) and MSE must not increase.
SweepReport run_sweep(const ExperimentConfig& config);
void emit_sweep(const SweepReport& report, const std::filesystem::path& output_dir);

struct SyntheticInstance {
  double slope = 1.0;
  double intercept = 0.0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  double eps = 0.0;
  double omega = 0.0;
  double target_bpp = 0.0;

  SyntheticLogLinearCurve curve() const {
    return SyntheticLogLinearCurve(slope, intercept, beta_min, beta_max, eps, omega);
  }
};

// Seeded log-linear curves with A in [0.5, 3], B in [-4, 0], beta_min in
// [1e-3, 1e-2], beta range 10:1 to 60:1, and a target drawn log-uniformly
// inside the attainable bpp range.
std::vector<SyntheticInstance> synthetic_suite(uint64_t seed, int count, double eps = 0.0,
                                               double omega = 0.0);

struct OracleRow {
  std::string image;
  double target_bpp = 0.0;
  int model_id = 0;
  OracleResult result;
  bool family_best = false;
};

struct OracleReport {
  std::vector<OracleRow> rows;
  std::vector<SyntheticInstance> synthetic;
  std::vector<OracleResult> synthetic_results;
};

OracleReport run_oracle(const ExperimentConfig& config);
void emit_oracle(const OracleReport& report, const std::filesystem::path& output_dir);

}  // namespace brm

#endif  // BRM_EXPERIMENT_H_
