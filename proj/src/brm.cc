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

#include "brm/brm.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <utility>

#include "brm/errors.h"

namespace brm {

void validate_target(const TargetSpec& target) {
  if (!(target.bpp_target > 0.0) || !std::isfinite(target.bpp_target)) {
    throw DomainError("target bpp must be positive");
  }
  if (!(target.tolerance > 0.0 && target.tolerance < 1.0)) {
    throw DomainError("tolerance must lie in (0, 1)");
  }
}

const char* to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::kDefault: return "default";
    case ProbeKind::kEndpoint: return "endpoint";
    case ProbeKind::kSearch: return "search";
  }
  return "?";
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kMatched: return "matched";
    case Outcome::kExhausted: return "exhausted";
    case Outcome::kInfeasible: return "infeasible";
  }
  return "?";
}

const char* to_string(RefitMode mode) {
  return mode == RefitMode::kAnchorMin ? "anchor_min" : "bracketing";
}

const char* to_string(Method method) {
  return method == Method::kBaseline ? "baseline" : "proposed";
}

std::size_t SearchTrace::count(ProbeKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      probes.begin(), probes.end(), [kind](const Probe& p) { return p.kind == kind; }));
}

void SearchTrace::add(const Probe& probe, const CostUnits& probe_cost) {
  cost += probe_cost;
  probes.push_back(probe);
  probes.back().cumulative = cost;
}

Validation validate_beta(RateCurve& curve, double beta, const TargetSpec& target,
                         bool want_loss) {
  Validation v;
  const CurveSample sample = curve.eval(beta);
  v.bpp = sample.bpp;
  v.cost = sample.cost;
  if (want_loss && within_tolerance(v.bpp, target)) {
    if (auto loss = curve.loss(beta)) {
      v.loss = loss->mse;
      v.cost += loss->cost;
    }
  }
  return v;
}

namespace {

constexpr double kRepeatTolerance = 1e-6;
constexpr double kFlatSlope = 1e-9;

struct Point {
  double beta = 0.0;
  double bpp = 0.0;
};

// Probe bookkeeping shared by both searches.
class SearchState {
 public:
  SearchState(RateCurve& curve, const TargetSpec& target, bool want_loss, SearchTrace seed)
      : curve_(curve), target_(target), want_loss_(want_loss), trace_(std::move(seed)) {
    validate_target(target);
    trace_.model_id = curve.modelId();
    trace_.best.reset();
  }

  const TargetSpec& target() const { return target_; }
  const SearchTrace& trace() const { return trace_; }

  Point probe(double beta, ProbeKind kind) {
    const Validation v = validate_beta(curve_, beta, target_, want_loss_);
    trace_.add({kind, beta, v.bpp, v.loss, {}}, v.cost);
    return {beta, v.bpp};
  }

  Point endpoint(double beta) { return probe(beta, ProbeKind::kEndpoint); }

  bool lastMatched() const { return within_tolerance(trace_.probes.back().bpp, target_); }

  // Index of an earlier probe within relative kRepeatTolerance of beta.
  std::optional<std::size_t> findRepeat(double beta) const {
    for (std::size_t i = 0; i < trace_.probes.size(); ++i) {
      if (std::abs(trace_.probes[i].beta - beta) <= kRepeatTolerance * trace_.probes[i].beta) {
        return i;
      }
    }
    return std::nullopt;
  }

  SearchTrace finish(Outcome outcome, std::size_t best) {
    trace_.outcome = outcome;
    trace_.best = best;
    Probe& chosen = trace_.probes[best];
    if (outcome == Outcome::kMatched && want_loss_ && !chosen.loss) {
      // Matched on a probe validated without loss (an earlier probe from the
      // seed trace).
      if (auto loss = curve_.loss(chosen.beta)) {
        chosen.loss = loss->mse;
        trace_.cost += loss->cost;
      }
    }
    return std::move(trace_);
  }

  SearchTrace finishMatchedLast() { return finish(Outcome::kMatched, trace_.probes.size() - 1); }

  SearchTrace finishBest(Outcome unmatched_outcome) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace_.probes.size(); ++i) {
      if (relative_error(trace_.probes[i].bpp, target_) <
          relative_error(trace_.probes[best].bpp, target_)) {
        best = i;
      }
    }
    const bool ok = within_tolerance(trace_.probes[best].bpp, target_);
    return finish(ok ? Outcome::kMatched : unmatched_outcome, best);
  }

 private:
  RateCurve& curve_;
  const TargetSpec& target_;
  bool want_loss_;
  SearchTrace trace_;
};

// Target outside [bpp(beta_min), bpp(beta_max)]: report the nearer endpoint.
SearchTrace FinishInfeasible(SearchState& state, const Point& lo, const Point& hi) {
  const Point& nearer = relative_error(lo.bpp, state.target()) <=
                                relative_error(hi.bpp, state.target())
                            ? lo
                            : hi;
  // The endpoints are the two most recent probes.
  const std::size_t last = state.trace().probes.size() - 1;
  const std::size_t index = &nearer == &hi ? last : last - 1;
  const bool ok = within_tolerance(nearer.bpp, state.target());
  return state.finish(ok ? Outcome::kMatched : Outcome::kInfeasible, index);
}

bool Attainable(const Point& lo, const Point& hi, double target) {
  return lo.bpp <= target && target <= hi.bpp;
}

// Solves the line through a and b in (log beta, log bpp) for the target.
std::optional<double> LogLinearProposal(const Point& a, const Point& b, double target) {
  if (!(a.bpp > 0.0) || !(b.bpp > 0.0) || a.beta == b.beta) return std::nullopt;
  const double slope = (std::log(b.bpp) - std::log(a.bpp)) / (std::log(b.beta) - std::log(a.beta));
  if (!(slope > kFlatSlope)) return std::nullopt;
  const double intercept = std::log(a.bpp) - slope * std::log(a.beta);
  const double beta = std::exp((std::log(target) - intercept) / slope);
  if (!std::isfinite(beta)) return std::nullopt;
  return beta;
}

}  // namespace

SearchTrace search_binary(RateCurve& curve, const TargetSpec& target,
                          const SearchOptions& options, SearchTrace seed) {
  const int max_iters = options.max_iters > 0 ? options.max_iters : kBinaryMaxIters;
  SearchState state(curve, target, options.want_loss, std::move(seed));
  Point lo = state.endpoint(curve.betaMin());
  Point hi = state.endpoint(curve.betaMax());
  if (!Attainable(lo, hi, target.bpp_target)) return FinishInfeasible(state, lo, hi);

  for (int i = 0; i < max_iters; ++i) {
    const double beta = std::sqrt(lo.beta * hi.beta);
    if (!(beta > lo.beta && beta < hi.beta)) break;  // bracket exhausted in floating point
    const Point p = state.probe(beta, ProbeKind::kSearch);
    if (state.lastMatched()) return state.finishMatchedLast();
    (p.bpp < target.bpp_target ? lo : hi) = p;
  }
  return state.finishBest(Outcome::kExhausted);
}

SearchTrace search_binary(RateCurve& curve, const TargetSpec& target, int max_iters) {
  return search_binary(curve, target, SearchOptions{max_iters, false, RefitMode::kAnchorMin});
}

SearchTrace search_loglinear(RateCurve& curve, const TargetSpec& target,
                             const SearchOptions& options, SearchTrace seed) {
  const int max_iters = options.max_iters > 0 ? options.max_iters : kLogLinearMaxIters;
  SearchState state(curve, target, options.want_loss, std::move(seed));
  Point lo = state.endpoint(curve.betaMin());
  Point hi = state.endpoint(curve.betaMax());
  if (!Attainable(lo, hi, target.bpp_target)) return FinishInfeasible(state, lo, hi);

  const Point anchor = lo;
  Point newest = hi;
  for (int i = 0; i < max_iters; ++i) {
    const bool anchored = options.refit == RefitMode::kAnchorMin;
    std::optional<double> beta = anchored ? LogLinearProposal(anchor, newest, target.bpp_target)
                                          : LogLinearProposal(lo, hi, target.bpp_target);
    if (beta) {
      beta = std::clamp(*beta, curve.betaMin(), curve.betaMax());
      if (auto repeat = state.findRepeat(*beta)) {
        if (within_tolerance(state.trace().probes[*repeat].bpp, target)) {
          return state.finish(Outcome::kMatched, *repeat);
        }
        beta.reset();
      }
    }
    if (!beta) {
      beta = std::sqrt(lo.beta * hi.beta);
      if (!(*beta > lo.beta && *beta < hi.beta)) break;
    }
    const Point p = state.probe(*beta, ProbeKind::kSearch);
    if (state.lastMatched()) return state.finishMatchedLast();
    (p.bpp < target.bpp_target ? lo : hi) = p;
    newest = p;
  }
  return state.finishBest(Outcome::kExhausted);
}

SearchTrace search_loglinear(RateCurve& curve, const TargetSpec& target, int max_iters) {
  return search_loglinear(curve, target,
                          SearchOptions{max_iters, false, RefitMode::kAnchorMin});
}

double relative_bit_distance(double bpp_default, double bpp_target) {
  if (!(bpp_default > 0.0) || !(bpp_target > 0.0)) {
    throw DomainError("relative_bit_distance: inputs must be positive");
  }
  return std::abs(bpp_default - bpp_target) / bpp_default;
}

std::size_t argmin_relative_distance(std::span<const double> default_bpps,
                                     double bpp_target) {
  if (default_bpps.empty()) throw ConfigError("model selection: empty model family");
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < default_bpps.size(); ++i) {
    // A model that spends no bits at its default point cannot be scaled to
    // the target.
    const double d = default_bpps[i] > 0.0 ? relative_bit_distance(default_bpps[i], bpp_target)
                                           : std::numeric_limits<double>::infinity();
    if (i == 0 || d < best_distance ||
        (d == best_distance && default_bpps[i] > default_bpps[best])) {
      best = i;
      best_distance = d;
    }
  }
  return best;
}

RelativeSelection select_model_relative(std::span<RateCurve* const> curves,
                                        const TargetSpec& target) {
  if (curves.empty()) throw ConfigError("model selection: empty model family");
  validate_target(target);
  RelativeSelection sel;
  for (RateCurve* curve : curves) {
    const double beta = curve->betaTrain();
    const Validation v = validate_beta(*curve, beta, target, false);
    SearchTrace trace;
    trace.model_id = curve->modelId();
    trace.add({ProbeKind::kDefault, beta, v.bpp, std::nullopt, {}}, v.cost);
    sel.default_bpps.push_back(v.bpp);
    sel.traces.push_back(std::move(trace));
  }
  sel.chosen = argmin_relative_distance(sel.default_bpps, target.bpp_target);
  return sel;
}

BaselineSelection select_model_baseline(std::span<RateCurve* const> curves,
                                        const TargetSpec& target, const SearchFn& search,
                                        const LossFn& loss) {
  if (curves.empty()) throw ConfigError("model selection: empty model family");
  validate_target(target);
  const double t = target.bpp_target;
  BaselineSelection sel;

  std::vector<Point> lows, highs;
  for (RateCurve* curve : curves) {
    SearchTrace trace;
    trace.model_id = curve->modelId();
    for (double beta : {curve->betaMin(), curve->betaMax()}) {
      const Validation v = validate_beta(*curve, beta, target, false);
      trace.add({ProbeKind::kEndpoint, beta, v.bpp, std::nullopt, {}}, v.cost);
    }
    lows.push_back({trace.probes[0].beta, trace.probes[0].bpp});
    highs.push_back({trace.probes[1].beta, trace.probes[1].bpp});
    sel.traces.push_back(std::move(trace));
  }

  std::vector<std::size_t> candidates;
  for (std::size_t m = 0; m < curves.size(); ++m) {
    if (Attainable(lows[m], highs[m], t)) candidates.push_back(m);
  }
  if (candidates.empty()) {
    std::size_t nearest = 0;
    double nearest_gap = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < curves.size(); ++m) {
      const double gap = std::min(std::abs(lows[m].bpp - t), std::abs(highs[m].bpp - t)) / t;
      if (gap < nearest_gap) {
        nearest = m;
        nearest_gap = gap;
      }
    }
    candidates.push_back(nearest);
  }

  for (std::size_t m : candidates) {
    sel.traces[m] = search(*curves[m], target, std::move(sel.traces[m]));
    CandidateResult c;
    c.index = m;
    c.matched = sel.traces[m].outcome == Outcome::kMatched;
    if (c.matched && sel.traces[m].bestProbe().loss) {
      const double mse = *sel.traces[m].bestProbe().loss;
      c.loss = loss ? loss(mse) : mse;
    }
    sel.candidates.push_back(c);
  }

  // Lowest loss among matched candidates; without any loss, the matched
  // candidate (or failing that, any candidate) closest to the target.
  const CandidateResult* best = nullptr;
  for (const CandidateResult& c : sel.candidates) {
    if (c.loss && (!best || !best->loss || *c.loss < *best->loss)) best = &c;
  }
  if (!best) {
    auto err = [&](const CandidateResult& c) {
      return relative_error(sel.traces[c.index].bestProbe().bpp, target);
    };
    for (const CandidateResult& c : sel.candidates) {
      if (!best || (c.matched && !best->matched) ||
          (c.matched == best->matched && err(c) < err(*best))) {
        best = &c;
      }
    }
  }
  sel.chosen = best->index;
  return sel;
}

namespace {

BrmResult Summarize(Method method, std::span<RateCurve* const> curves, std::size_t chosen,
                    std::vector<SearchTrace> traces, const TargetSpec& target) {
  BrmResult r;
  r.method = method;
  r.model_index = chosen;
  r.model_id = curves[chosen]->modelId();
  const Probe& best = traces[chosen].bestProbe();
  r.beta_test = best.beta;
  r.delta_beta = best.beta / curves[chosen]->betaTrain();
  r.bpp_achieved = best.bpp;
  r.matched = within_tolerance(best.bpp, target);
  r.outcome = traces[chosen].outcome;
  r.loss = best.loss;
  for (const SearchTrace& t : traces) r.cost += t.cost;
  r.traces = std::move(traces);
  return r;
}

}  // namespace

BrmResult run_brm(std::span<RateCurve* const> curves, const TargetSpec& target,
                  Method method, const BrmConfig& config) {
  if (curves.empty()) throw ConfigError("run_brm: empty model family");
  validate_target(target);
  if (method == Method::kBaseline) {
    const SearchOptions options{config.binary_max_iters, true, config.refit};
    auto search = [&](RateCurve& curve, const TargetSpec& t, SearchTrace seed) {
      return search_binary(curve, t, options, std::move(seed));
    };
    BaselineSelection sel = select_model_baseline(curves, target, search);
    BrmResult r = Summarize(method, curves, sel.chosen, std::move(sel.traces), target);
    r.candidates = sel.candidates.size();
    for (const CandidateResult& c : sel.candidates) r.matched_candidates += c.matched ? 1 : 0;
    return r;
  }
  RelativeSelection sel = select_model_relative(curves, target);
  const SearchOptions options{config.loglinear_max_iters, false, config.refit};
  sel.traces[sel.chosen] =
      search_loglinear(*curves[sel.chosen], target, options, std::move(sel.traces[sel.chosen]));
  BrmResult r = Summarize(method, curves, sel.chosen, std::move(sel.traces), target);
  r.candidates = 1;
  r.matched_candidates = r.matched ? 1 : 0;
  return r;
}

OracleResult oracle_best_beta(RateCurve& curve, const TargetSpec& target, int grid_size) {
  validate_target(target);
  if (grid_size < 64) throw DomainError("oracle_best_beta: grid_size must be >= 64");
  OracleResult best;
  best.relative_error = std::numeric_limits<double>::infinity();
  for (double beta : geometric_grid(curve.betaMin(), curve.betaMax(), grid_size)) {
    const double bpp = curve.eval(beta).bpp;
    const double err = relative_error(bpp, target);
    if (err < best.relative_error) best = {beta, bpp, err};
  }
  return best;
}

void write_trace_lines(std::ostream& out, const BrmResult& result, const std::string& prefix) {
  CostUnits base;
  const auto old_precision = out.precision(17);
  for (const SearchTrace& trace : result.traces) {
    for (const Probe& p : trace.probes) {
      const CostUnits c = base + p.cumulative;
      out << prefix << "probe model_id=" << trace.model_id << " kind=" << to_string(p.kind)
          << " beta=" << p.beta << " bpp=" << p.bpp << " encoder_runs=" << c.encoder_runs
          << " entropy_evals=" << c.entropy_evals << " decoder_runs=" << c.decoder_runs
          << '\n';
    }
    base += trace.cost;
  }
  out.precision(old_precision);
}

}  // namespace brm
