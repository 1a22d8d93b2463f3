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

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "brm/errors.h"
#include "brm/experiment.h"
#include "test_util.h"

namespace brm {
namespace {

namespace fs = std::filesystem;
using testing::CorpusDir;
using testing::ScratchDir;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(Slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

// One-image corpus in a scratch directory.
fs::path SmallCorpus(const std::string& name, const std::string& image = "clock.pgm") {
  const fs::path dir = ScratchDir(name) / "corpus";
  fs::create_directories(dir);
  fs::copy_file(CorpusDir() / image, dir / image);
  return dir;
}

ExperimentConfig SmallConfig(const std::string& name) {
  ExperimentConfig c = default_config();
  c.corpus_dir = SmallCorpus(name);
  c.output_dir = c.corpus_dir.parent_path() / "out";
  return c;
}

// ---- config --------------------------------------------------------------

TEST(Config, EmptyFileGivesDefaults) {
  const ExperimentConfig c = parse_config("", "/data/exp");
  ASSERT_EQ(c.models.size(), 4u);
  EXPECT_EQ(c.targets, (std::vector<double>{0.06, 0.12, 0.25, 0.5, 0.75}));
  EXPECT_DOUBLE_EQ(c.tolerance, 0.10);
  const double beta_train[] = {0.002, 0.007, 0.015, 0.05};
  const double dmin[] = {0.1, 0.3, 0.4, 0.6};
  const double dmax[] = {2.0, 1.4, 2.0, 6.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(c.models[i].beta_train, beta_train[i]);
    EXPECT_DOUBLE_EQ(c.models[i].delta_min, dmin[i]);
    EXPECT_DOUBLE_EQ(c.models[i].delta_max, dmax[i]);
  }
  EXPECT_EQ(c.methods, MethodSet::kBoth);
  EXPECT_EQ(c.corpus_dir, fs::path("/data/exp/corpus"));
  EXPECT_EQ(c.search.binary_max_iters, 32);
  EXPECT_EQ(c.search.loglinear_max_iters, 10);
}

TEST(Config, ToleranceOutOfRange) {
  EXPECT_THROW(parse_config("tolerance: 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("tolerance: 0\n"), ConfigError);
}

TEST(Config, InvariantsNamed) {
  try {
    parse_config("targets: [0.1, -0.2]\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("targets"), std::string::npos);
  }
  EXPECT_THROW(parse_config("targets: []\n"), ConfigError);
  EXPECT_THROW(parse_config("models: []\n"), ConfigError);
  EXPECT_THROW(parse_config("config_version: 2\n"), ConfigError);
  EXPECT_THROW(parse_config("workers: 0\n"), ConfigError);
  EXPECT_THROW(parse_config("methods: all\n"), ConfigError);
  EXPECT_THROW(parse_config("speed: fast\n"), ConfigError);
  EXPECT_THROW(parse_config("search: {refit: newton}\n"), ConfigError);
  EXPECT_THROW(
      parse_config("models:\n  - {beta_train: 0.01, delta_min: 1.2, delta_max: 2, gain_scale: 1}\n"),
      ConfigError);
  EXPECT_THROW(parse_config("models:\n  - {beta_train: 0.01, delta_min: 0.5}\n"), ConfigError);
}

TEST(Config, ParseErrorsCarryLine) {
  try {
    parse_config("config_version: 1\ntargets: [0.1]\ntolerance: lots\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  try {
    parse_config("targets: [0.1, 0.2\nmodels: 3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 1);
  }
  EXPECT_THROW(parse_config("- 1\n- 2\n"), ParseError);
}

TEST(Config, MinimalFileRuns) {
  const fs::path corpus = SmallCorpus("minimal");
  const fs::path cfg = corpus.parent_path() / "exp.yaml";
  std::ofstream(cfg) << "config_version: 1\n"
                        "corpus_dir: corpus\n"
                        "output_dir: out\n"
                        "targets: [0.06]\n"
                        "models:\n"
                        "  - {beta_train: 0.015, delta_min: 0.4, delta_max: 2.0, gain_scale: 0.015}\n"
                        "search: {refit: bracketing}\n";
  const ExperimentConfig c = load_config(cfg);
  EXPECT_EQ(c.corpus_dir, corpus);
  EXPECT_EQ(c.search.refit, RefitMode::kBracketing);
  const RunReport r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.error.empty());
    EXPECT_TRUE(row.matched);
    EXPECT_EQ(row.model_id, 0);
  }
  EXPECT_THROW(load_config(corpus / "missing.yaml"), std::runtime_error);
}

// ---- run / report --------------------------------------------------------

class ExperimentRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new ExperimentConfig(SmallConfig("run"));
    report_ = new RunReport(run_experiment(*config_));
    emit_report(*report_, config_->output_dir);
  }
  static void TearDownTestSuite() {
    delete report_;
    delete config_;
  }
  static ExperimentConfig* config_;
  static RunReport* report_;
};

ExperimentConfig* ExperimentRun::config_ = nullptr;
RunReport* ExperimentRun::report_ = nullptr;

TEST_F(ExperimentRun, TenRowsAndPipelineContract) {
  ASSERT_EQ(report_->rows.size(), 10u);
  for (const ResultRow& row : report_->rows) {
    ASSERT_TRUE(row.error.empty()) << row.error;
    if (row.method == Method::kProposed) {
      EXPECT_EQ(row.cost.decoder_runs, 0);
      EXPECT_LE(row.cost.encoder_runs, static_cast<int64_t>(config_->models.size()));
    } else if (row.matched) {
      EXPECT_GE(row.cost.decoder_runs, 1);
    }
    // The matched flag agrees with the row's own numbers.
    EXPECT_EQ(row.matched, row.bit_diff_percent <= 100.0 * config_->tolerance);
    EXPECT_NEAR(row.bit_diff_percent, bit_difference(row.bpp_achieved, row.target_bpp), 1e-12);
  }
}

TEST_F(ExperimentRun, ResultsCsvShape) {
  const auto rows = ReadCsv(config_->output_dir / "results.csv");
  ASSERT_EQ(rows.size(), 11u);
  const std::vector<std::string> head(rows[0].begin(), rows[0].begin() + 12);
  EXPECT_EQ(head, (std::vector<std::string>{"image", "target_bpp", "method", "model_id",
                                            "beta_test", "delta_beta", "bpp_achieved",
                                            "bit_diff_percent", "matched", "encoder_runs",
                                            "entropy_evals", "decoder_runs"}));
  EXPECT_TRUE(fs::exists(config_->output_dir / "curves" / "baseline.csv"));
  EXPECT_TRUE(fs::exists(config_->output_dir / "curves" / "proposed.csv"));
  EXPECT_TRUE(fs::exists(config_->output_dir / "trace.log"));
}

TEST_F(ExperimentRun, AccountingClosure) {
  const auto rows = ReadCsv(config_->output_dir / "results.csv");
  const auto summary = nlohmann::json::parse(Slurp(config_->output_dir / "summary.json"));
  for (const auto& m : summary["methods"]) {
    int64_t enc = 0, ent = 0, dec = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][2] != m["method"].get<std::string>()) continue;
      enc += std::stoll(rows[i][9]);
      ent += std::stoll(rows[i][10]);
      dec += std::stoll(rows[i][11]);
    }
    EXPECT_EQ(m["encoder_runs"].get<int64_t>(), enc);
    EXPECT_EQ(m["entropy_evals"].get<int64_t>(), ent);
    EXPECT_EQ(m["decoder_runs"].get<int64_t>(), dec);
  }
  // The trace log ends each row with its final counters.
  EXPECT_NE(Slurp(config_->output_dir / "trace.log").find("method=proposed probe"),
            std::string::npos);
}

TEST_F(ExperimentRun, ProbeRatioReported) {
  const auto summary = nlohmann::json::parse(Slurp(config_->output_dir / "summary.json"));
  ASSERT_TRUE(summary["probe_ratio"].is_number());
  int64_t base = 0, prop = 0;
  for (const auto& m : summary["methods"]) {
    (m["method"] == "baseline" ? base : prop) = m["entropy_evals"].get<int64_t>();
  }
  EXPECT_DOUBLE_EQ(summary["probe_ratio"].get<double>(), static_cast<double>(prop) / base);
  EXPECT_TRUE(summary["bd_rate"].is_object());
}

TEST_F(ExperimentRun, RerunIsByteIdentical) {
  ExperimentConfig again = *config_;
  again.output_dir = config_->output_dir.parent_path() / "out2";
  again.workers = 3;
  emit_report(run_experiment(again), again.output_dir);
  for (const char* f : {"results.csv", "summary.json", "trace.log", "curves/baseline.csv",
                        "curves/proposed.csv"}) {
    EXPECT_EQ(Slurp(config_->output_dir / f), Slurp(again.output_dir / f)) << f;
  }
}

TEST(Experiment, IdenticalMethodsGiveZeroBd) {
  RunReport report;
  const double targets[] = {0.06, 0.12, 0.25, 0.5, 0.75};
  for (Method m : {Method::kBaseline, Method::kProposed}) {
    for (double t : targets) {
      ResultRow row;
      row.image = "x";
      row.method = m;
      row.target_bpp = t;
      row.bpp_achieved = t * 1.02;
      row.psnr_db = 25.0 + 10.0 * std::log10(t * 100.0);
      row.matched = true;
      report.rows.push_back(row);
    }
  }
  summarize(report, {targets, targets + 5});
  ASSERT_TRUE(report.bd_rate.has_value());
  EXPECT_EQ(report.bd_rate->bd_rate_percent, 0.0);
  const fs::path out = ScratchDir("identical");
  emit_report(report, out);
  const auto summary = nlohmann::json::parse(Slurp(out / "summary.json"));
  EXPECT_EQ(summary["bd_rate"]["bd_rate_percent"].get<double>(), 0.0);
}

TEST(Experiment, UnreadableImageIsRowError) {
  ExperimentConfig c = SmallConfig("broken");
  c.targets = {0.25};
  c.methods = MethodSet::kProposed;
  std::ofstream(c.corpus_dir / "broken.pgm") << "P5\n10 10\n255\nshort";
  const RunReport r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].image, "broken.pgm");
  EXPECT_FALSE(r.rows[0].error.empty());
  EXPECT_TRUE(r.rows[1].error.empty());
  EXPECT_EQ(r.methods.at(0).errors, 1u);
  EXPECT_FALSE(r.probe_ratio.has_value());
}

TEST(Experiment, EmptyCorpusIsFatal) {
  ExperimentConfig c = default_config();
  c.corpus_dir = ScratchDir("empty");
  EXPECT_THROW(run_experiment(c), std::runtime_error);
  c.corpus_dir = ScratchDir("empty") / "nope";
  EXPECT_THROW(run_experiment(c), std::runtime_error);
}

// ---- sweep, synthetic suite, oracle --------------------------------------

TEST(Sweep, MonotoneOnSmallGrid) {
  ExperimentConfig c = SmallConfig("sweep");
  c.sweep_points = 8;
  const SweepReport r = run_sweep(c);
  EXPECT_EQ(r.rows.size(), 4u * 8u);
  EXPECT_TRUE(r.violations.empty());
  emit_sweep(r, c.output_dir);
  EXPECT_EQ(ReadCsv(c.output_dir / "sweep.csv").size(), 33u);
}

TEST(SyntheticSuite, SeededAndInRange) {
  const auto a = synthetic_suite(5, 50);
  const auto b = synthetic_suite(5, 50);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].slope, b[i].slope);
    EXPECT_EQ(a[i].target_bpp, b[i].target_bpp);
    EXPECT_GE(a[i].slope, 0.5);
    EXPECT_LE(a[i].slope, 3.0);
    EXPECT_GE(a[i].intercept, -4.0);
    EXPECT_LE(a[i].intercept, 0.0);
    const SyntheticLogLinearCurve c = a[i].curve();
    EXPECT_GE(a[i].target_bpp, c.bppAt(c.betaMin()));
    EXPECT_LE(a[i].target_bpp, c.bppAt(c.betaMax()));
  }
  EXPECT_NE(synthetic_suite(6, 1)[0].slope, a[0].slope);
}

TEST(Oracle, FamilyBestMarkedOncePerInstance) {
  ExperimentConfig c = SmallConfig("oracle");
  c.targets = {0.12, 0.5};
  c.oracle_grid = 128;
  c.synthetic_curves = 5;
  const OracleReport r = run_oracle(c);
  ASSERT_EQ(r.rows.size(), 8u);
  int marked = 0;
  for (const auto& row : r.rows) marked += row.family_best ? 1 : 0;
  EXPECT_EQ(marked, 2);
  ASSERT_EQ(r.synthetic_results.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    // Half a grid cell in log beta, mapped through the slope.
    const SyntheticInstance& s = r.synthetic[i];
    const double cell = std::log(s.beta_max / s.beta_min) / (c.oracle_grid - 1);
    EXPECT_LE(r.synthetic_results[i].relative_error, std::exp(0.5 * s.slope * cell) - 1.0);
  }
  emit_oracle(r, c.output_dir);
  EXPECT_EQ(ReadCsv(c.output_dir / "oracle.csv").size(), 9u);
}

}  // namespace
}  // namespace brm
