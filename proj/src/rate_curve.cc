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

#include "brm/rate_curve.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "brm/errors.h"

namespace brm {

void RateCurve::checkRange(double beta) const {
  if (!(beta >= betaMin() && beta <= betaMax())) {
    std::ostringstream msg;
    msg << "beta " << beta << " outside [" << betaMin() << ", " << betaMax() << "]";
    throw OutOfRangeError(msg.str());
  }
}

CodecCurve::CodecCurve(std::shared_ptr<const Image> image, CodecModel model,
                       std::shared_ptr<LatentCache> cache)
    : image_(std::move(image)), model_(std::move(model)), cache_(std::move(cache)) {
  if (!image_) throw GeometryError("CodecCurve: null image");
  validate_model(model_);
}

std::shared_ptr<const LatentTensor> CodecCurve::latentFor(CostUnits& cost) {
  auto encode = [&] { return encode_latent(*image_, model_); };
  if (cache_) {
    auto [latent, encoded] = cache_->getOrEncode(encode);
    if (encoded) cost.encoder_runs += 1;
    return latent;
  }
  working_ = std::make_shared<const LatentTensor>(encode());
  cost.encoder_runs += 1;
  return working_;
}

CurveSample CodecCurve::eval(double beta) {
  checkRange(beta);
  CurveSample out;
  const auto latent = latentFor(out.cost);
  const QuantizedLatent q = quantize(*latent, model_.gain, beta / model_.beta_train);
  out.bpp = estimate_rate(q, image_->pixelCount());
  out.cost.entropy_evals += 1;
  return out;
}

std::optional<CurveLoss> CodecCurve::loss(double beta) {
  checkRange(beta);
  CurveLoss out;
  std::shared_ptr<const LatentTensor> latent = cache_ ? cache_->peek() : working_;
  if (!latent) latent = latentFor(out.cost);
  const double delta = beta / model_.beta_train;
  const QuantizedLatent q = quantize(*latent, model_.gain, delta);
  const Image recon = decode(q, model_.gain, delta, latent->geometry);
  out.mse = mean_squared_error(*image_, recon);
  out.cost.decoder_runs += 1;
  return out;
}

std::unique_ptr<CodecCurve> make_codec_curve(std::shared_ptr<const Image> image,
                                             const CodecModel& model,
                                             std::shared_ptr<LatentCache> cache) {
  return std::make_unique<CodecCurve>(std::move(image), model, std::move(cache));
}

SyntheticLogLinearCurve::SyntheticLogLinearCurve(double slope, double intercept,
                                                 double beta_min, double beta_max,
                                                 double eps, double omega,
                                                 std::optional<double> beta_train)
    : slope_(slope),
      intercept_(intercept),
      beta_min_(beta_min),
      beta_max_(beta_max),
      eps_(eps),
      omega_(omega),
      beta_train_(beta_train.value_or(std::sqrt(beta_min * beta_max))) {
  if (!(slope_ > 0.0) || !std::isfinite(intercept_)) {
    throw DomainError("synthetic curve: slope must be positive");
  }
  if (!(beta_min_ > 0.0) || !(beta_max_ >= beta_min_) || !std::isfinite(beta_max_)) {
    throw DomainError("synthetic curve: need 0 < beta_min <= beta_max");
  }
  if (!(beta_train_ >= beta_min_ && beta_train_ <= beta_max_)) {
    throw DomainError("synthetic curve: beta_train outside range");
  }
  if (!(eps_ >= 0.0 && eps_ <= 0.05) || !(omega_ >= 0.0 && omega_ <= 3.0)) {
    throw DomainError("synthetic curve: need eps in [0, 0.05] and omega in [0, 3]");
  }
  // d/dt of A t + eps sin(omega t) must stay positive.
  if (!(eps_ * omega_ < slope_)) {
    throw DomainError("synthetic curve: perturbation would break monotonicity");
  }
}

double SyntheticLogLinearCurve::bppAt(double beta) const {
  checkRange(beta);
  const double t = std::log(beta);
  return std::exp(slope_ * t + intercept_ + eps_ * std::sin(omega_ * t));
}

CurveSample SyntheticLogLinearCurve::eval(double beta) {
  CurveSample out;
  out.bpp = bppAt(beta);
  out.cost.entropy_evals = 1;
  return out;
}

double SyntheticLogLinearCurve::lineInverse(double bpp) const {
  return std::exp((std::log(bpp) - intercept_) / slope_);
}

double synthetic_eval(const SyntheticLogLinearCurve& curve, double beta) {
  return curve.bppAt(beta);
}

TabulatedCurve::TabulatedCurve(std::vector<CurveSamplePoint> samples,
                               std::optional<double> beta_train)
    : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw DomainError("tabulated curve: need at least two samples");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!(s.beta > 0.0) || !(s.bpp > 0.0) || !std::isfinite(s.beta) || !std::isfinite(s.bpp)) {
      throw DomainError("tabulated curve: beta and bpp must be positive");
    }
    if (i > 0 && !(s.beta > samples_[i - 1].beta)) {
      throw DomainError("tabulated curve: beta must be strictly increasing");
    }
    if (i > 0 && s.bpp < samples_[i - 1].bpp) {
      throw DomainError("tabulated curve: bpp must be non-decreasing");
    }
  }
  beta_train_ = beta_train.value_or(std::sqrt(betaMin() * betaMax()));
  if (!(beta_train_ >= betaMin() && beta_train_ <= betaMax())) {
    throw DomainError("tabulated curve: beta_train outside range");
  }
}

double TabulatedCurve::bppAt(double beta) const {
  checkRange(beta);
  auto hi = std::lower_bound(samples_.begin(), samples_.end(), beta,
                             [](const CurveSamplePoint& s, double b) { return s.beta < b; });
  if (hi->beta == beta) return hi->bpp;
  auto lo = hi - 1;
  const double t = (std::log(beta) - std::log(lo->beta)) / (std::log(hi->beta) - std::log(lo->beta));
  return std::exp(std::log(lo->bpp) + t * (std::log(hi->bpp) - std::log(lo->bpp)));
}

CurveSample TabulatedCurve::eval(double beta) {
  CurveSample out;
  out.bpp = bppAt(beta);
  out.cost.entropy_evals = 1;
  return out;
}

TabulatedCurve load_tabulated_curve(std::istream& in, std::optional<double> beta_train) {
  std::vector<CurveSamplePoint> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    CurveSamplePoint p;
    if (!(fields >> p.beta)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("tabulated curve: expected 'beta bpp'", line_no);
    }
    std::string extra;
    if (!(fields >> p.bpp) || (fields >> extra)) {
      throw ParseError("tabulated curve: expected 'beta bpp'", line_no);
    }
    samples.push_back(p);
  }
  return TabulatedCurve(std::move(samples), beta_train);
}

TabulatedCurve load_tabulated_curve(const std::filesystem::path& path,
                                    std::optional<double> beta_train) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_tabulated_curve(in, beta_train);
}

CurveSample MemoizedCurve::eval(double beta) {
  if (auto it = seen_.find(beta); it != seen_.end()) return {it->second, {}};
  CurveSample sample = inner_.eval(beta);
  seen_.emplace(beta, sample.bpp);
  return sample;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 2) {
    throw DomainError("geometric_grid: need 0 < lo <= hi and n >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

MonotonicityAudit audit_monotone(RateCurve& curve, int grid_points) {
  MonotonicityAudit audit;
  for (double beta : geometric_grid(curve.betaMin(), curve.betaMax(), grid_points)) {
    audit.samples.push_back({beta, curve.eval(beta).bpp});
  }
  for (std::size_t i = 0; i + 1 < audit.samples.size(); ++i) {
    if (audit.samples[i + 1].bpp < audit.samples[i].bpp) {
      audit.monotone = false;
      audit.first_violation = i;
      break;
    }
  }
  return audit;
}

}  // namespace brm
