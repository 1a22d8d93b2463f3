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

#ifndef BRM_RATE_CURVE_H_
#define BRM_RATE_CURVE_H_

// Anything that maps beta_test to bpp over an admissible range: the toy codec,
// exact or perturbed log-linear curves, and tabulated recordings.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "brm/codec.h"
#include "brm/image.h"

namespace brm {

struct CurveSample {
  double bpp = 0.0;
  CostUnits cost;
};

struct CurveLoss {
  double mse = 0.0;
  CostUnits cost;
};

class RateCurve {
 public:
  virtual ~RateCurve() = default;

  // Throws OutOfRangeError outside [betaMin(), betaMax()].
  virtual CurveSample eval(double beta) = 0;

  // Reconstruction MSE at beta, for curves that can reconstruct.
  virtual std::optional<CurveLoss> loss(double beta) {
    static_cast<void>(beta);
    return std::nullopt;
  }

  virtual double betaMin() const = 0;
  virtual double betaMax() const = 0;
  virtual double betaTrain() const = 0;
  virtual int modelId() const { return 0; }

 protected:
  void checkRange(double beta) const;
};

// Pre-gain latent shared between probes of one (image, model) pair. Safe for
// concurrent use.
class LatentCache {
 public:
  // Returns the cached latent, computing it with `encode` on first use. The
  // flag reports whether `encode` ran.
  template <typename Encode>
  std::pair<std::shared_ptr<const LatentTensor>, bool> getOrEncode(Encode&& encode) {
    std::lock_guard<std::mutex> lock(mu_);
    if (latent_) return {latent_, false};
    latent_ = std::make_shared<const LatentTensor>(encode());
    return {latent_, true};
  }

  std::shared_ptr<const LatentTensor> peek() const {
    std::lock_guard<std::mutex> lock(mu_);
    return latent_;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const LatentTensor> latent_;
};

// Rate curve backed by the toy codec; eval(beta) runs at delta = beta /
// beta_train. Without a cache every eval runs the encoder, as in a full
// re-encode validation; with one, only the first eval does.
class CodecCurve final : public RateCurve {
 public:
  CodecCurve(std::shared_ptr<const Image> image, CodecModel model,
             std::shared_ptr<LatentCache> cache);

  CurveSample eval(double beta) override;
  std::optional<CurveLoss> loss(double beta) override;

  double betaMin() const override { return model_.betaMin(); }
  double betaMax() const override { return model_.betaMax(); }
  double betaTrain() const override { return model_.beta_train; }
  int modelId() const override { return model_.model_id; }

  const CodecModel& model() const { return model_; }
  const Image& image() const { return *image_; }

 private:
  std::shared_ptr<const LatentTensor> latentFor(CostUnits& cost);

  std::shared_ptr<const Image> image_;
  CodecModel model_;
  std::shared_ptr<LatentCache> cache_;
  // Latent of the validation in progress when running uncached; the decoder
  // of that same validation reuses it.
  std::shared_ptr<const LatentTensor> working_;
};

std::unique_ptr<CodecCurve> make_codec_curve(std::shared_ptr<const Image> image,
                                             const CodecModel& model,
                                             std::shared_ptr<LatentCache> cache);

// log(bpp) = A log(beta) + B + eps sin(omega log(beta)).
class SyntheticLogLinearCurve final : public RateCurve {
 public:
  // Requires A > 0, 0 <= eps <= 0.05, 0 <= omega <= 3, eps * omega < A, and
  // 0 < beta_min <= beta_train <= beta_max.
  SyntheticLogLinearCurve(double slope, double intercept, double beta_min,
                          double beta_max, double eps = 0.0, double omega = 0.0,
                          std::optional<double> beta_train = std::nullopt);

  CurveSample eval(double beta) override;
  double bppAt(double beta) const;

  double betaMin() const override { return beta_min_; }
  double betaMax() const override { return beta_max_; }
  double betaTrain() const override { return beta_train_; }

  double slope() const { return slope_; }
  double intercept() const { return intercept_; }
  // Closed-form inverse of the unperturbed line.
  double lineInverse(double bpp) const;

 private:
  double slope_, intercept_, beta_min_, beta_max_, eps_, omega_, beta_train_;
};

double synthetic_eval(const SyntheticLogLinearCurve& curve, double beta);

struct CurveSamplePoint {
  double beta = 0.0;
  double bpp = 0.0;
};

// Piecewise linear in (log beta, log bpp) between recorded samples.
class TabulatedCurve final : public RateCurve {
 public:
  TabulatedCurve(std::vector<CurveSamplePoint> samples,
                 std::optional<double> beta_train = std::nullopt);

  CurveSample eval(double beta) override;
  double bppAt(double beta) const;

  double betaMin() const override { return samples_.front().beta; }
  double betaMax() const override { return samples_.back().beta; }
  double betaTrain() const override { return beta_train_; }
  const std::vector<CurveSamplePoint>& samples() const { return samples_; }

 private:
  std::vector<CurveSamplePoint> samples_;
  double beta_train_;
};

// "beta bpp" per line, '#' starts a comment.
TabulatedCurve load_tabulated_curve(std::istream& in,
                                    std::optional<double> beta_train = std::nullopt);
TabulatedCurve load_tabulated_curve(const std::filesystem::path& path,
                                    std::optional<double> beta_train = std::nullopt);

// Remembers every (beta, bpp) it has seen; repeated betas cost nothing.
// Used by the exhaustive oracle, which revisits the same grid per target.
class MemoizedCurve final : public RateCurve {
 public:
  explicit MemoizedCurve(RateCurve& inner) : inner_(inner) {}

  CurveSample eval(double beta) override;

  double betaMin() const override { return inner_.betaMin(); }
  double betaMax() const override { return inner_.betaMax(); }
  double betaTrain() const override { return inner_.betaTrain(); }
  int modelId() const override { return inner_.modelId(); }

 private:
  RateCurve& inner_;
  std::map<double, double> seen_;
};

// n points from lo to hi inclusive, equally spaced in log.
std::vector<double> geometric_grid(double lo, double hi, int n);

struct MonotonicityAudit {
  bool monotone = true;
  std::vector<CurveSamplePoint> samples;
  // Index i of the first pair (i, i + 1) that decreases.
  std::optional<std::size_t> first_violation;
};

// Evaluates on an n-point geometric grid over the curve's range and checks
// that bpp never decreases.
MonotonicityAudit audit_monotone(RateCurve& curve, int grid_points = 64);

}  // namespace brm

#endif  // BRM_RATE_CURVE_H_
