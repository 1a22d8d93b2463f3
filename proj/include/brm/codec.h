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

#ifndef BRM_CODEC_H_
#define BRM_CODEC_H_

// A deterministic block-DCT codec with a per-band gain unit. The gain vector
// scaled by delta_beta acts as a channel-wise quantization map, so a single
// model covers a continuous range of rates, and the pre-gain latent is
// independent of delta_beta and can be cached between probes.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>

#include <Eigen/Core>

#include "brm/image.h"

namespace brm {

inline constexpr int kBlockDim = 8;
inline constexpr int kBands = kBlockDim * kBlockDim;

template <typename Scalar>
using BandMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, kBands, Eigen::RowMajor>;

template <typename Scalar>
using BlockMatrix = Eigen::Matrix<Scalar, kBlockDim, kBlockDim>;

// Orthonormal DCT-II basis: row u is alpha(u) * cos((2x + 1) u pi / 16).
template <typename Scalar>
BlockMatrix<Scalar> dct_matrix() {
  BlockMatrix<Scalar> m;
  const Scalar pi = Scalar(3.14159265358979323846264338327950288);
  for (int u = 0; u < kBlockDim; ++u) {
    const Scalar alpha = u == 0 ? std::sqrt(Scalar(1) / kBlockDim)
                                : std::sqrt(Scalar(2) / kBlockDim);
    for (int x = 0; x < kBlockDim; ++x) {
      m(u, x) = alpha * std::cos((2 * x + 1) * u * pi / (2 * kBlockDim));
    }
  }
  return m;
}

// kZigZag[k] is the row-major (v * 8 + u) position of band k.
extern const std::array<int, kBands> kZigZag;
// Standard JPEG luminance quantization table, flattened in zig-zag order.
extern const std::array<int, kBands> kJpegLumaQuantZigZag;

// Geometry shared by a source image and everything derived from it.
struct LatentGeometry {
  int width = 0;
  int height = 0;
  int channels = 0;

  int blocksX() const { return (width + kBlockDim - 1) / kBlockDim; }
  int blocksY() const { return (height + kBlockDim - 1) / kBlockDim; }
  Eigen::Index rows() const {
    return static_cast<Eigen::Index>(blocksX()) * blocksY() * channels;
  }
  std::size_t pixelCount() const { return static_cast<std::size_t>(width) * height; }

  friend bool operator==(const LatentGeometry&, const LatentGeometry&) = default;
};

// Pre-gain transform coefficients. Row (by * blocksX + bx) * channels + c holds
// the 64 bands of one block, band 0 = DC, bands in zig-zag order.
template <typename Scalar>
struct LatentTensorT {
  LatentGeometry geometry;
  int model_id = 0;
  BandMatrix<Scalar> coefficients;
};
using LatentTensor = LatentTensorT<double>;

struct QuantizedLatent {
  LatentGeometry geometry;
  BandMatrix<int32_t> symbols;
};

class GainVector {
 public:
  using Array = Eigen::Array<double, kBands, 1>;

  explicit GainVector(const Array& g);
  const Array& values() const { return g_; }
  double operator[](int k) const { return g_[k]; }

 private:
  Array g_;
};

// w_k = scale * 16 / Q_k with Q the JPEG luminance table.
GainVector jpeg_gain_vector(double scale);

struct CodecModel {
  int model_id = 0;
  double beta_train = 1.0;
  GainVector gain = jpeg_gain_vector(1.0);
  double delta_min = 1.0;
  double delta_max = 1.0;

  double betaMin() const { return beta_train * delta_min; }
  double betaMax() const { return beta_train * delta_max; }
};

// Throws ConfigError unless 0 < delta_min <= 1 <= delta_max and beta_train > 0.
void validate_model(const CodecModel& model);
CodecModel make_model(int model_id, double beta_train, double delta_min,
                      double delta_max, double gain_scale);

struct RateDistortionPoint {
  double bpp = 0.0;
  double mse = 0.0;
  double psnr = 0.0;

  friend bool operator==(const RateDistortionPoint&, const RateDistortionPoint&) = default;
};

// Algorithm-visible cost of a validation, in units of network runs.
struct CostUnits {
  int64_t encoder_runs = 0;
  int64_t entropy_evals = 0;
  int64_t decoder_runs = 0;

  CostUnits& operator+=(const CostUnits& o) {
    encoder_runs += o.encoder_runs;
    entropy_evals += o.entropy_evals;
    decoder_runs += o.decoder_runs;
    return *this;
  }
  friend CostUnits operator+(CostUnits a, const CostUnits& b) { return a += b; }
  friend bool operator==(const CostUnits&, const CostUnits&) = default;
};

// Pads by edge replication to multiples of 8, subtracts 128 and applies the
// orthonormal 8x8 DCT-II per block and channel.
LatentTensor encode_latent(const Image& image, const CodecModel& model);

// q = round_half_away_from_zero(c * g_k * delta_beta).
QuantizedLatent quantize(const LatentTensor& latent, const GainVector& gain,
                         double delta_beta);

// Sum over bands of the empirical zeroth-order entropy (in bits) of that
// band's symbols, divided by pixel_count.
double estimate_rate(const QuantizedLatent& q, std::size_t pixel_count);

Image decode(const QuantizedLatent& q, const GainVector& gain, double delta_beta,
             const LatentGeometry& geometry);

struct Evaluation {
  RateDistortionPoint point;
  std::shared_ptr<const LatentTensor> latent;
  CostUnits cost;
};

// Full validation at one delta_beta. When `latent` is given the encoder is
// skipped; the result is bit-identical to the uncached path.
Evaluation evaluate(const Image& image, const CodecModel& model, double delta_beta,
                    std::shared_ptr<const LatentTensor> latent = nullptr);

LatentGeometry geometry_of(const Image& image);

}  // namespace brm

#endif  // BRM_CODEC_H_
