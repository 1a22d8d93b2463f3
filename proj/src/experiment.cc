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

#include "brm/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "brm/errors.h"

namespace brm {

namespace {

namespace fs = std::filesystem;

// Runs job(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all threads have joined.
void ParallelFor(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void CloseOut(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

bool IsNetpbm(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

std::vector<std::unique_ptr<CodecCurve>> MakeCurves(const std::shared_ptr<const Image>& image,
                                                    const std::vector<CodecModel>& models,
                                                    bool cached) {
  std::vector<std::unique_ptr<CodecCurve>> curves;
  for (const CodecModel& m : models) {
    curves.push_back(make_codec_curve(image, m, cached ? std::make_shared<LatentCache>() : nullptr));
  }
  return curves;
}

}  // namespace

std::vector<CorpusImage> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && IsNetpbm(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("corpus is empty: " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<CorpusImage> corpus;
  for (const fs::path& f : files) {
    CorpusImage item;
    item.name = f.filename().string();
    try {
      item.image = std::make_shared<const Image>(read_netpbm(f));
    } catch (const std::exception& e) {
      item.error = e.what();
      spdlog::warn("skipping {}: {}", item.name, item.error);
    }
    corpus.push_back(std::move(item));
  }
  return corpus;
}

RunReport run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<CorpusImage> corpus = load_corpus(config.corpus_dir);
  const std::vector<CodecModel> models = config.codecModels();
  const std::vector<Method> methods = config.methodList();

  RunReport report;
  const std::size_t per_image = config.targets.size() * methods.size();
  report.rows.resize(corpus.size() * per_image);
  ParallelFor(report.rows.size(), config.workers, [&](std::size_t i) {
    const CorpusImage& item = corpus[i / per_image];
    const double target_bpp = config.targets[(i % per_image) / methods.size()];
    const Method method = methods[i % methods.size()];
    ResultRow& row = report.rows[i];
    row.image = item.name;
    row.target_bpp = target_bpp;
    row.method = method;
    if (!item.image) {
      row.error = item.error;
      return;
    }
    try {
      // Only the proposed pipeline keeps latents between probes.
      auto owned = MakeCurves(item.image, models, method == Method::kProposed);
      std::vector<RateCurve*> curves;
      for (auto& c : owned) curves.push_back(c.get());
      const TargetSpec target{target_bpp, config.tolerance};
      const BrmResult result = run_brm(curves, target, method, config.search);
      row.model_id = result.model_id;
      row.beta_test = result.beta_test;
      row.delta_beta = result.delta_beta;
      row.bpp_achieved = result.bpp_achieved;
      row.bit_diff_percent = bit_difference(result.bpp_achieved, target_bpp);
      row.matched = result.matched;
      row.outcome = result.outcome;
      row.cost = result.cost;
      row.candidates = result.candidates;
      row.matched_candidates = result.matched_candidates;
      const Evaluation final_eval =
          evaluate(*item.image, models[result.model_index], result.delta_beta);
      row.psnr_db = final_eval.point.psnr;
      std::ostringstream trace;
      write_trace_lines(trace, result,
                        "image=" + item.name + " target=" + Num(target_bpp) +
                            " method=" + to_string(method) + " ");
      row.trace = trace.str();
    } catch (const std::exception& e) {
      row = ResultRow{};
      row.image = item.name;
      row.target_bpp = target_bpp;
      row.method = method;
      row.error = e.what();
      spdlog::warn("{} at {} bpp ({}): {}", item.name, target_bpp, to_string(method), row.error);
    }
  });
  summarize(report, config.targets);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void summarize(RunReport& report, const std::vector<double>& targets) {
  report.methods.clear();
  for (Method method : {Method::kBaseline, Method::kProposed}) {
    MethodSummary s;
    s.method = method;
    std::size_t matched = 0;
    double bit_diff = 0.0;
    std::vector<RdPoint> points;
    for (double t : targets) {
      double bpp = 0.0, quality = 0.0;
      std::size_t n = 0;
      for (const ResultRow& row : report.rows) {
        if (row.method != method || row.target_bpp != t || !row.error.empty()) continue;
        if (!std::isfinite(row.psnr_db)) continue;
        bpp += row.bpp_achieved;
        quality += row.psnr_db;
        ++n;
      }
      if (n == 0) continue;
      // Targets beyond every model's range can land on the same endpoint.
      const RdPoint p{bpp / n, quality / n};
      if (std::none_of(points.begin(), points.end(),
                       [&](const RdPoint& q) { return q.bpp == p.bpp; })) {
        points.push_back(p);
      }
    }
    for (const ResultRow& row : report.rows) {
      if (row.method != method) continue;
      ++s.rows;
      s.cost += row.cost;
      if (!row.error.empty()) {
        ++s.errors;
        continue;
      }
      matched += row.matched ? 1 : 0;
      bit_diff += row.bit_diff_percent;
    }
    if (s.rows == 0) continue;
    const std::size_t ok = s.rows - s.errors;
    if (ok > 0) {
      s.matched_fraction = static_cast<double>(matched) / ok;
      s.mean_bit_diff_percent = bit_diff / ok;
    }
    try {
      if (!points.empty()) s.rd_curve = RdCurve(points);
    } catch (const DomainError& e) {
      spdlog::warn("no RD curve for {}: {}", to_string(method), e.what());
    }
    report.methods.push_back(std::move(s));
  }
  report.bd_rate = strategy_bd_rate(report, Method::kBaseline, Method::kProposed);
  report.probe_ratio.reset();
  const MethodSummary* base = nullptr;
  const MethodSummary* prop = nullptr;
  for (const auto& s : report.methods) {
    (s.method == Method::kBaseline ? base : prop) = &s;
  }
  if (base && prop && base->cost.entropy_evals > 0) {
    report.probe_ratio = static_cast<double>(prop->cost.entropy_evals) /
                         static_cast<double>(base->cost.entropy_evals);
  }
}

std::optional<BdResult> strategy_bd_rate(const RunReport& report, Method anchor, Method test) {
  const RdCurve* a = nullptr;
  const RdCurve* t = nullptr;
  for (const auto& s : report.methods) {
    if (!s.rd_curve) continue;
    if (s.method == anchor) a = &*s.rd_curve;
    if (s.method == test) t = &*s.rd_curve;
  }
  if (!a || !t) return std::nullopt;
  try {
    return bd_rate(*a, *t);
  } catch (const DomainError& e) {
    spdlog::warn("BD-rate unavailable: {}", e.what());
    return std::nullopt;
  }
}

void emit_report(const RunReport& report, const fs::path& output_dir) {
  fs::create_directories(output_dir / "curves");

  const fs::path results = output_dir / "results.csv";
  std::ofstream csv = OpenOut(results);
  csv << "image,target_bpp,method,model_id,beta_test,delta_beta,bpp_achieved,"
         "bit_diff_percent,matched,encoder_runs,entropy_evals,decoder_runs,outcome,"
         "candidates,psnr_db,error\n";
  for (const ResultRow& r : report.rows) {
    csv << CsvField(r.image) << ',' << Num(r.target_bpp) << ',' << to_string(r.method) << ','
        << r.model_id << ',' << Num(r.beta_test) << ',' << Num(r.delta_beta) << ','
        << Num(r.bpp_achieved) << ',' << Num(r.bit_diff_percent) << ','
        << (r.matched ? "true" : "false") << ',' << r.cost.encoder_runs << ','
        << r.cost.entropy_evals << ',' << r.cost.decoder_runs << ','
        << (r.error.empty() ? to_string(r.outcome) : "error") << ',' << r.candidates << ','
        << Num(r.psnr_db) << ',' << CsvField(r.error) << '\n';
  }
  CloseOut(csv, results);

  nlohmann::ordered_json summary;
  summary["config_version"] = kConfigVersion;
  summary["methods"] = nlohmann::ordered_json::array();
  for (const MethodSummary& s : report.methods) {
    nlohmann::ordered_json m;
    m["method"] = to_string(s.method);
    m["rows"] = s.rows;
    m["errors"] = s.errors;
    m["matched_fraction"] = s.matched_fraction;
    m["mean_bit_diff_percent"] = s.mean_bit_diff_percent;
    m["encoder_runs"] = s.cost.encoder_runs;
    m["entropy_evals"] = s.cost.entropy_evals;
    m["decoder_runs"] = s.cost.decoder_runs;
    summary["methods"].push_back(m);

    if (s.rd_curve) {
      write_rd_curve_csv(output_dir / "curves" / (std::string(to_string(s.method)) + ".csv"),
                         *s.rd_curve);
    }
  }
  if (report.bd_rate) {
    summary["bd_rate"] = {{"anchor", "baseline"},
                          {"test", "proposed"},
                          {"bd_rate_percent", report.bd_rate->bd_rate_percent},
                          {"quality_low_db", report.bd_rate->quality_low},
                          {"quality_high_db", report.bd_rate->quality_high}};
  } else {
    summary["bd_rate"] = nullptr;
  }
  summary["probe_ratio"] = nullptr;
  if (report.probe_ratio) summary["probe_ratio"] = *report.probe_ratio;

  const fs::path summary_path = output_dir / "summary.json";
  std::ofstream js = OpenOut(summary_path);
  js << summary.dump(2) << '\n';
  CloseOut(js, summary_path);

  const fs::path trace_path = output_dir / "trace.log";
  std::ofstream trace = OpenOut(trace_path);
  for (const ResultRow& r : report.rows) trace << r.trace;
  CloseOut(trace, trace_path);
}

SweepReport run_sweep(const ExperimentConfig& config) {
  validate_config(config);
  const std::vector<CorpusImage> corpus = load_corpus(config.corpus_dir);
  const std::vector<CodecModel> models = config.codecModels();
  const std::size_t pairs = corpus.size() * models.size();
  std::vector<std::vector<SweepRow>> rows(pairs);
  std::vector<std::vector<SweepViolation>> violations(pairs);

  ParallelFor(pairs, config.workers, [&](std::size_t i) {
    const CorpusImage& item = corpus[i / models.size()];
    const CodecModel& model = models[i % models.size()];
    if (!item.image) {
      violations[i].push_back({item.name, model.model_id, "unreadable: " + item.error});
      return;
    }
    std::shared_ptr<const LatentTensor> latent;
    for (double delta : geometric_grid(model.delta_min, model.delta_max, config.sweep_points)) {
      const Evaluation ev = evaluate(*item.image, model, delta, latent);
      latent = ev.latent;
      rows[i].push_back({item.name, model.model_id, delta, model.beta_train * delta, ev.point});
    }
    const auto& r = rows[i];
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
      const auto& a = r[k].point;
      const auto& b = r[k + 1].point;
      if (b.bpp <= a.bpp && !(a.bpp == 0.0 && b.bpp == 0.0)) {
        violations[i].push_back({item.name, model.model_id,
                                 "bpp not increasing at delta " + Num(r[k + 1].delta)});
      }
      if (b.mse > a.mse) {
        violations[i].push_back({item.name, model.model_id,
                                 "mse increases at delta " + Num(r[k + 1].delta)});
      }
    }
  });

  SweepReport report;
  for (std::size_t i = 0; i < pairs; ++i) {
    report.rows.insert(report.rows.end(), rows[i].begin(), rows[i].end());
    report.violations.insert(report.violations.end(), violations[i].begin(),
                             violations[i].end());
  }
  return report;
}

void emit_sweep(const SweepReport& report, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  const fs::path path = output_dir / "sweep.csv";
  std::ofstream out = OpenOut(path);
  out << "image,model_id,delta_beta,beta,bpp,mse,psnr_db\n";
  for (const SweepRow& r : report.rows) {
    out << CsvField(r.image) << ',' << r.model_id << ',' << Num(r.delta) << ',' << Num(r.beta)
        << ',' << Num(r.point.bpp) << ',' << Num(r.point.mse) << ',' << Num(r.point.psnr)
        << '\n';
  }
  CloseOut(out, path);
  const fs::path vpath = output_dir / "sweep_violations.csv";
  std::ofstream v = OpenOut(vpath);
  v << "image,model_id,violation\n";
  for (const SweepViolation& s : report.violations) {
    v << CsvField(s.image) << ',' << s.model_id << ',' << CsvField(s.what) << '\n';
  }
  CloseOut(v, vpath);
}

std::vector<SyntheticInstance> synthetic_suite(uint64_t seed, int count, double eps,
                                               double omega) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::vector<SyntheticInstance> out;
  for (int i = 0; i < count; ++i) {
    SyntheticInstance s;
    s.slope = uniform(0.5, 3.0);
    s.intercept = uniform(-4.0, 0.0);
    s.beta_min = std::exp(uniform(std::log(1e-3), std::log(1e-2)));
    s.beta_max = s.beta_min * uniform(10.0, 60.0);
    s.eps = eps;
    s.omega = omega;
    const SyntheticLogLinearCurve c = s.curve();
    const double lo = std::log(c.bppAt(s.beta_min));
    const double hi = std::log(c.bppAt(s.beta_max));
    s.target_bpp = std::exp(uniform(lo, hi));
    out.push_back(s);
  }
  return out;
}

OracleReport run_oracle(const ExperimentConfig& config) {
  validate_config(config);
  const std::vector<CorpusImage> corpus = load_corpus(config.corpus_dir);
  const std::vector<CodecModel> models = config.codecModels();
  const std::size_t pairs = corpus.size() * models.size();
  std::vector<std::vector<OracleRow>> rows(pairs);

  ParallelFor(pairs, config.workers, [&](std::size_t i) {
    const CorpusImage& item = corpus[i / models.size()];
    const CodecModel& model = models[i % models.size()];
    if (!item.image) return;
    auto curve = make_codec_curve(item.image, model, std::make_shared<LatentCache>());
    MemoizedCurve memo(*curve);
    for (double t : config.targets) {
      OracleRow row;
      row.image = item.name;
      row.target_bpp = t;
      row.model_id = model.model_id;
      row.result = oracle_best_beta(memo, {t, config.tolerance}, config.oracle_grid);
      rows[i].push_back(row);
    }
  });

  OracleReport report;
  for (auto& r : rows) report.rows.insert(report.rows.end(), r.begin(), r.end());
  // Mark the model with the smallest error per (image, target).
  std::map<std::pair<std::string, double>, std::size_t> best;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto key = std::make_pair(report.rows[i].image, report.rows[i].target_bpp);
    auto it = best.find(key);
    if (it == best.end() ||
        report.rows[i].result.relative_error < report.rows[it->second].result.relative_error) {
      best[key] = i;
    }
  }
  for (const auto& kv : best) report.rows[kv.second].family_best = true;

  report.synthetic = synthetic_suite(config.seed, config.synthetic_curves);
  for (const SyntheticInstance& s : report.synthetic) {
    SyntheticLogLinearCurve c = s.curve();
    report.synthetic_results.push_back(
        oracle_best_beta(c, {s.target_bpp, config.tolerance}, config.oracle_grid));
  }
  return report;
}

void emit_oracle(const OracleReport& report, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  const fs::path path = output_dir / "oracle.csv";
  std::ofstream out = OpenOut(path);
  out << "image,target_bpp,model_id,beta,bpp,relative_error,family_best\n";
  for (const OracleRow& r : report.rows) {
    out << CsvField(r.image) << ',' << Num(r.target_bpp) << ',' << r.model_id << ','
        << Num(r.result.beta) << ',' << Num(r.result.bpp) << ','
        << Num(r.result.relative_error) << ',' << (r.family_best ? "true" : "false") << '\n';
  }
  CloseOut(out, path);

  const fs::path spath = output_dir / "oracle_synthetic.csv";
  std::ofstream s = OpenOut(spath);
  s << "index,slope,intercept,beta_min,beta_max,target_bpp,closed_form_beta,beta,bpp,"
       "relative_error\n";
  for (std::size_t i = 0; i < report.synthetic.size(); ++i) {
    const SyntheticInstance& inst = report.synthetic[i];
    const OracleResult& r = report.synthetic_results[i];
    s << i << ',' << Num(inst.slope) << ',' << Num(inst.intercept) << ','
      << Num(inst.beta_min) << ',' << Num(inst.beta_max) << ',' << Num(inst.target_bpp) << ','
      << Num(inst.curve().lineInverse(inst.target_bpp)) << ',' << Num(r.beta) << ','
      << Num(r.bpp) << ',' << Num(r.relative_error) << '\n';
  }
  CloseOut(s, spath);
}

}  // namespace brm
