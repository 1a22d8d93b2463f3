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

// brm: bit rate matching experiments on the toy codec.
//
//   brm run <config>                 both pipelines over corpus x targets
//   brm sweep <config>               delta-grid monotonicity audit
//   brm bdrate <anchor.csv> <test.csv>
//   brm oracle <config>              grid-search reference results
//
// Exit status: 0 success, 1 fatal error or failed audit, 2 invalid config.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "brm/bd_metrics.h"
#include "brm/errors.h"
#include "brm/experiment.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  int workers = 0;
  std::string output;
};

brm::ExperimentConfig LoadWithOverrides(const std::string& path, const Overrides& o) {
  brm::ExperimentConfig config = brm::load_config(path);
  if (o.workers > 0) config.workers = o.workers;
  if (!o.output.empty()) config.output_dir = o.output;
  brm::validate_config(config);
  return config;
}

int Run(const std::string& path, const Overrides& o) {
  const brm::ExperimentConfig config = LoadWithOverrides(path, o);
  const brm::RunReport report = brm::run_experiment(config);
  brm::emit_report(report, config.output_dir);
  for (const auto& m : report.methods) {
    std::printf("%-9s rows=%zu errors=%zu matched=%.3f bitdiff=%.2f%% encoder=%lld entropy=%lld decoder=%lld\n",
                brm::to_string(m.method), m.rows, m.errors, m.matched_fraction,
                m.mean_bit_diff_percent, static_cast<long long>(m.cost.encoder_runs),
                static_cast<long long>(m.cost.entropy_evals),
                static_cast<long long>(m.cost.decoder_runs));
  }
  if (report.probe_ratio) std::printf("probe ratio (proposed/baseline): %.4f\n", *report.probe_ratio);
  if (report.bd_rate) std::printf("BD-rate proposed vs baseline: %+.3f%%\n", report.bd_rate->bd_rate_percent);
  spdlog::info("run finished in {:.2f} s, outputs in {}", report.wall_seconds,
               config.output_dir.string());
  return kExitOk;
}

int Sweep(const std::string& path, const Overrides& o) {
  const brm::ExperimentConfig config = LoadWithOverrides(path, o);
  const brm::SweepReport report = brm::run_sweep(config);
  brm::emit_sweep(report, config.output_dir);
  for (const auto& v : report.violations) {
    spdlog::error("{} model {}: {}", v.image, v.model_id, v.what);
  }
  std::printf("sweep: %zu points, %zu violations\n", report.rows.size(), report.violations.size());
  return report.violations.empty() ? kExitOk : kExitFatal;
}

int BdRate(const std::string& anchor, const std::string& test) {
  const brm::BdResult r =
      brm::bd_rate(brm::read_rd_curve_csv(anchor), brm::read_rd_curve_csv(test));
  std::printf("BD-rate: %+.4f%% over [%.3f, %.3f] dB\n", r.bd_rate_percent, r.quality_low,
              r.quality_high);
  return kExitOk;
}

int Oracle(const std::string& path, const Overrides& o) {
  const brm::ExperimentConfig config = LoadWithOverrides(path, o);
  const brm::OracleReport report = brm::run_oracle(config);
  brm::emit_oracle(report, config.output_dir);
  std::printf("oracle: %zu codec rows, %zu synthetic curves\n", report.rows.size(),
              report.synthetic.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bit rate matching experiments"};
  app.require_subcommand(1);
  Overrides overrides;
  std::string log_level = "info";
  app.add_option("--workers", overrides.workers, "Worker threads (overrides config)")
      ->check(CLI::PositiveNumber);
  app.add_option("--output", overrides.output, "Output directory (overrides config)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, critical, off");

  std::string config_path, anchor_csv, test_csv;
  auto* run = app.add_subcommand("run", "Run both pipelines and write the report");
  run->add_option("config", config_path, "Config file")->required();
  auto* sweep = app.add_subcommand("sweep", "Delta-grid monotonicity audit");
  sweep->add_option("config", config_path, "Config file")->required();
  auto* bd = app.add_subcommand("bdrate", "BD-rate between two RD curve CSVs");
  bd->add_option("anchor", anchor_csv, "Anchor curve")->required();
  bd->add_option("test", test_csv, "Test curve")->required();
  auto* oracle = app.add_subcommand("oracle", "Grid-search reference results");
  oracle->add_option("config", config_path, "Config file")->required();

  for (CLI::App* sub : {run, sweep, bd, oracle}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; usage errors count as fatal.
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  const auto level = spdlog::level::from_str(log_level);
  if (level == spdlog::level::off && log_level != "off") {
    std::fprintf(stderr, "unknown log level '%s'\n", log_level.c_str());
    return kExitFatal;
  }
  spdlog::set_level(level);

  try {
    if (*run) return Run(config_path, overrides);
    if (*sweep) return Sweep(config_path, overrides);
    if (*bd) return BdRate(anchor_csv, test_csv);
    if (*oracle) return Oracle(config_path, overrides);
  } catch (const brm::ParseError& e) {
    spdlog::critical("{}", e.what());
    return kExitConfig;
  } catch (const brm::ConfigError& e) {
    spdlog::critical("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return kExitFatal;
  }
  return kExitFatal;
}
