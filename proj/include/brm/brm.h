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

#ifndef BRM_BRM_H_
#define BRM_BRM_H_

// Bit rate matching over a family of rate curves, one curve per model.
//
// Two pipelines share the same building blocks:
//   baseline: models whose [bpp(beta_min), bpp(beta_max)] range covers the
//             target are candidates; each runs a geometric bisection and the
//             matched candidate with the lowest reconstruction loss wins.
//   proposed: each model is evaluated once at beta_train and the one with the
//             smallest relative bit distance is searched with a log-log linear
//             fit; no reconstruction is needed.
// Costs are reported in encoder runs, entropy evaluations and decoder runs.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brm/codec.h"
#include "brm/rate_curve.h"

namespace brm {

struct TargetSpec {
  double bpp_target = 0.0;
  double tolerance = 0.10;
};

// Throws DomainError unless bpp_target > 0 and 0 < tolerance < 1.
void validate_target(const TargetSpec& target);

inline double relative_error(double bpp, const TargetSpec& target) {
  return std::abs(bpp - target.bpp_target) / target.bpp_target;
}
inline bool within_tolerance(double bpp, const TargetSpec& target) {
  return relative_error(bpp, target) <= target.tolerance;
}

enum class ProbeKind { kDefault, kEndpoint, kSearch };
enum class Outcome { kMatched, kExhausted, kInfeasible };
enum class RefitMode { kAnchorMin, kBracketing };
enum class Method { kBaseline, kProposed };

const char* to_string(ProbeKind kind);
const char* to_string(Outcome outcome);
const char* to_string(RefitMode mode);
const char* to_string(Method method);

struct Probe {
  ProbeKind kind = ProbeKind::kSearch;
  double beta = 0.0;
  double bpp = 0.0;
  std::optional<double> loss;
  // Trace counters after this probe.
  CostUnits cumulative;
};

struct SearchTrace {
  int model_id = 0;
  std::vector<Probe> probes;
  CostUnits cost;
  Outcome outcome = Outcome::kExhausted;
  // Probe reported as the search result; unset until a search completes.
  std::optional<std::size_t> best;

  const Probe& bestProbe() const { return probes.at(best.value()); }
  std::size_t count(ProbeKind kind) const;
  void add(const Probe& probe, const CostUnits& cost);
};

struct Validation {
  double bpp = 0.0;
  std::optional<double> loss;
  CostUnits cost;
};

// One beta_test validation. The loss (reconstruction MSE) is computed only
// when want_loss is set and the bpp already lies within tolerance.
Validation validate_beta(RateCurve& curve, double beta, const TargetSpec& target,
                         bool want_loss);

inline constexpr int kBinaryMaxIters = 32;
inline constexpr int kLogLinearMaxIters = 10;

struct SearchOptions {
  int max_iters = 0;  // 0 selects the method default
  bool want_loss = false;
  RefitMode refit = RefitMode::kAnchorMin;
};

// Geometric bisection. The search evaluates both endpoints, then bisects
// until a probe lands within tolerance; `max_iters` bounds the probes after
// the endpoints. Probes are appended to `seed`, which only carries earlier
// history of the same curve.
SearchTrace search_binary(RateCurve& curve, const TargetSpec& target,
                          const SearchOptions& options = {}, SearchTrace seed = {});
SearchTrace search_binary(RateCurve& curve, const TargetSpec& target, int max_iters);

// Log-log linear search: fits log(bpp) = A log(beta) + B through the endpoints,
// solves for the target, then refits through (beta_min, bpp_min) and the
// newest probe (or, with RefitMode::kBracketing, through the current
// bracket). Flat fits and repeated proposals fall back to one bisection step.
SearchTrace search_loglinear(RateCurve& curve, const TargetSpec& target,
                             const SearchOptions& options = {}, SearchTrace seed = {});
SearchTrace search_loglinear(RateCurve& curve, const TargetSpec& target, int max_iters);

// |bpp_default - bpp_target| / bpp_default.
double relative_bit_distance(double bpp_default, double bpp_target);

// Index of the smallest relative bit distance; exact ties go to the higher
// default bpp.
std::size_t argmin_relative_distance(std::span<const double> default_bpps,
                                     double bpp_target);

struct RelativeSelection {
  std::size_t chosen = 0;
  std::vector<double> default_bpps;
  // One trace per model holding its beta_train probe.
  std::vector<SearchTrace> traces;
};

RelativeSelection select_model_relative(std::span<RateCurve* const> curves,
                                        const TargetSpec& target);

using SearchFn =
    std::function<SearchTrace(RateCurve&, const TargetSpec&, SearchTrace seed)>;
using LossFn = std::function<double(double mse)>;

struct CandidateResult {
  std::size_t index = 0;
  bool matched = false;
  std::optional<double> loss;
};

struct BaselineSelection {
  std::size_t chosen = 0;
  std::vector<CandidateResult> candidates;
  // One trace per model: range endpoints, plus the search for candidates.
  std::vector<SearchTrace> traces;
};

// Candidates are the models whose endpoint bpp range covers the target; when
// none does, the model with the relatively nearest range boundary is the sole
// candidate. `search` must be called with want_loss semantics so that matched
// probes carry a loss.
BaselineSelection select_model_baseline(std::span<RateCurve* const> curves,
                                        const TargetSpec& target, const SearchFn& search,
                                        const LossFn& loss = {});

struct BrmConfig {
  int binary_max_iters = kBinaryMaxIters;
  int loglinear_max_iters = kLogLinearMaxIters;
  RefitMode refit = RefitMode::kAnchorMin;
};

struct BrmResult {
  Method method = Method::kProposed;
  std::size_t model_index = 0;
  int model_id = 0;
  double beta_test = 0.0;
  double delta_beta = 0.0;
  double bpp_achieved = 0.0;
  bool matched = false;
  Outcome outcome = Outcome::kExhausted;
  std::size_t candidates = 0;
  // Candidates whose search ended within tolerance.
  std::size_t matched_candidates = 0;
  std::optional<double> loss;
  std::vector<SearchTrace> traces;
  CostUnits cost;
};

BrmResult run_brm(std::span<RateCurve* const> curves, const TargetSpec& target,
                  Method method, const BrmConfig& config = {});

struct OracleResult {
  double beta = 0.0;
  double bpp = 0.0;
  double relative_error = 0.0;
};

inline constexpr int kOracleGrid = 512;

// Exhaustive search over a geometric grid of beta values.
OracleResult oracle_best_beta(RateCurve& curve, const TargetSpec& target,
                              int grid_size = kOracleGrid);

// One "probe ..." line per probe, counters cumulative over the run.
void write_trace_lines(std::ostream& out, const BrmResult& result,
                       const std::string& prefix = {});

}  // namespace brm

#endif  // BRM_BRM_H_
