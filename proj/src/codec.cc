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

#include "brm/codec.h"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "brm/bd_metrics.h"
#include "brm/errors.h"

namespace brm {

const std::array<int, kBands> kZigZag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
};

namespace {

constexpr std::array<int, kBands> kJpegLumaQuantNatural = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

std::array<int, kBands> ToZigZag(const std::array<int, kBands>& natural) {
  std::array<int, kBands> out{};
  for (int k = 0; k < kBands; ++k) out[k] = natural[kZigZag[k]];
  return out;
}

const BlockMatrix<double>& Dct() {
  static const BlockMatrix<double> m = dct_matrix<double>();
  return m;
}

}  // namespace

const std::array<int, kBands> kJpegLumaQuantZigZag = ToZigZag(kJpegLumaQuantNatural);

GainVector::GainVector(const Array& g) : g_(g) {
  if (!(g_ > 0.0).all() || !g_.isFinite().all()) {
    throw DomainError("gain vector entries must be positive and finite");
  }
}

GainVector jpeg_gain_vector(double scale) {
  if (!(scale > 0.0)) throw DomainError("gain scale must be positive");
  GainVector::Array g;
  for (int k = 0; k < kBands; ++k) g[k] = scale * 16.0 / kJpegLumaQuantZigZag[k];
  return GainVector(g);
}

void validate_model(const CodecModel& model) {
  if (!(model.beta_train > 0.0)) throw ConfigError("beta_train must be positive");
  if (!(model.delta_min > 0.0) || !(model.delta_min <= 1.0) || !(model.delta_max >= 1.0) ||
      !std::isfinite(model.delta_max)) {
    throw ConfigError("model " + std::to_string(model.model_id) +
                      ": need 0 < delta_min <= 1 <= delta_max");
  }
}

CodecModel make_model(int model_id, double beta_train, double delta_min,
                      double delta_max, double gain_scale) {
  CodecModel m{model_id, beta_train, jpeg_gain_vector(gain_scale), delta_min, delta_max};
  validate_model(m);
  return m;
}

LatentGeometry geometry_of(const Image& image) {
  return {image.width(), image.height(), image.channels()};
}

LatentTensor encode_latent(const Image& image, const CodecModel& model) {
  if (image.width() < kBlockDim || image.height() < kBlockDim) {
    throw GeometryError("encode_latent: image must be at least 8x8");
  }
  LatentTensor latent;
  latent.geometry = geometry_of(image);
  latent.model_id = model.model_id;
  const LatentGeometry& geo = latent.geometry;
  latent.coefficients.resize(geo.rows(), kBands);

  const BlockMatrix<double>& dct = Dct();
  BlockMatrix<double> block;
  Eigen::Index row = 0;
  for (int by = 0; by < geo.blocksY(); ++by) {
    for (int bx = 0; bx < geo.blocksX(); ++bx) {
      for (int c = 0; c < geo.channels; ++c, ++row) {
        for (int y = 0; y < kBlockDim; ++y) {
          const int sy = std::min(by * kBlockDim + y, geo.height - 1);
          for (int x = 0; x < kBlockDim; ++x) {
            const int sx = std::min(bx * kBlockDim + x, geo.width - 1);
            block(y, x) = static_cast<double>(image.at(sx, sy, c)) - 128.0;
          }
        }
        const BlockMatrix<double> freq = dct * block * dct.transpose();
        for (int k = 0; k < kBands; ++k) {
          const int pos = kZigZag[k];
          latent.coefficients(row, k) = freq(pos / kBlockDim, pos % kBlockDim);
        }
      }
    }
  }
  return latent;
}

QuantizedLatent quantize(const LatentTensor& latent, const GainVector& gain,
                         double delta_beta) {
  if (!(delta_beta > 0.0)) throw DomainError("quantize: delta_beta must be positive");
  const Eigen::Array<double, 1, kBands> step = (gain.values() * delta_beta).transpose();
  QuantizedLatent q;
  q.geometry = latent.geometry;
  // Eigen's round() is std::round: half away from zero.
  q.symbols = (latent.coefficients.array().rowwise() * step).round().cast<int32_t>().matrix();
  return q;
}

double estimate_rate(const QuantizedLatent& q, std::size_t pixel_count) {
  if (pixel_count == 0) throw DomainError("estimate_rate: pixel_count must be positive");
  const Eigen::Index n = q.symbols.rows();
  if (n == 0) return 0.0;
  const Eigen::Matrix<int32_t, 1, kBands> lo = q.symbols.colwise().minCoeff();
  const Eigen::Matrix<int32_t, 1, kBands> hi = q.symbols.colwise().maxCoeff();

  // Dense histograms for bands with a compact symbol range, filled in one
  // row-major pass; bands with a sparse range are sorted instead.
  const int64_t dense_limit = 4 * static_cast<int64_t>(n) + 4096;
  std::array<std::size_t, kBands + 1> offset{};
  std::array<bool, kBands> dense{};
  for (int k = 0; k < kBands; ++k) {
    const int64_t span = static_cast<int64_t>(hi[k]) - lo[k] + 1;
    dense[k] = span <= dense_limit;
    offset[k + 1] = offset[k] + (dense[k] ? static_cast<std::size_t>(span) : 0);
  }
  std::vector<int64_t> counts(offset[kBands], 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int32_t* row = q.symbols.row(i).data();
    for (int k = 0; k < kBands; ++k) {
      if (dense[k]) ++counts[offset[k] + static_cast<std::size_t>(row[k] - lo[k])];
    }
  }

  const double total = static_cast<double>(n);
  double bits = 0.0;
  std::vector<int32_t> scratch;
  for (int k = 0; k < kBands; ++k) {
    if (lo[k] == hi[k]) continue;
    if (dense[k]) {
      for (std::size_t j = offset[k]; j < offset[k + 1]; ++j) {
        if (counts[j] > 0) {
          const double c = static_cast<double>(counts[j]);
          bits += c * std::log2(total / c);
        }
      }
      continue;
    }
    const auto band = q.symbols.col(k);
    scratch.assign(band.begin(), band.end());
    std::sort(scratch.begin(), scratch.end());
    std::size_t i = 0;
    while (i < scratch.size()) {
      std::size_t j = i;
      while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
      const double c = static_cast<double>(j - i);
      bits += c * std::log2(total / c);
      i = j;
    }
  }
  return bits / static_cast<double>(pixel_count);
}

Image decode(const QuantizedLatent& q, const GainVector& gain, double delta_beta,
             const LatentGeometry& geometry) {
  if (!(delta_beta > 0.0)) throw DomainError("decode: delta_beta must be positive");
  if (geometry.channels != 1 && geometry.channels != 3) {
    throw GeometryError("decode: geometry must have 1 or 3 channels");
  }
  if (geometry.width <= 0 || geometry.height <= 0 || geometry.rows() != q.symbols.rows()) {
    throw GeometryError("decode: geometry does not match quantized latent");
  }
  const Eigen::Array<double, 1, kBands> step = (gain.values() * delta_beta).transpose();
  const BlockMatrix<double>& dct = Dct();
  Image out(geometry.width, geometry.height, geometry.channels);
  BlockMatrix<double> freq;
  Eigen::Index row = 0;
  for (int by = 0; by < geometry.blocksY(); ++by) {
    for (int bx = 0; bx < geometry.blocksX(); ++bx) {
      for (int c = 0; c < geometry.channels; ++c, ++row) {
        for (int k = 0; k < kBands; ++k) {
          const int pos = kZigZag[k];
          freq(pos / kBlockDim, pos % kBlockDim) = q.symbols(row, k) / step[k];
        }
        const BlockMatrix<double> block = dct.transpose() * freq * dct;
        for (int y = 0; y < kBlockDim; ++y) {
          const int sy = by * kBlockDim + y;
          if (sy >= geometry.height) break;
          for (int x = 0; x < kBlockDim; ++x) {
            const int sx = bx * kBlockDim + x;
            if (sx >= geometry.width) break;
            const double v = std::clamp(block(y, x) + 128.0, 0.0, 255.0);
            out.at(sx, sy, c) = static_cast<uint8_t>(std::round(v));
          }
        }
      }
    }
  }
  return out;
}

Evaluation evaluate(const Image& image, const CodecModel& model, double delta_beta,
                    std::shared_ptr<const LatentTensor> latent) {
  Evaluation result;
  if (latent) {
    if (latent->geometry != geometry_of(image) || latent->model_id != model.model_id) {
      throw GeometryError("evaluate: cached latent does not belong to this image/model");
    }
  } else {
    latent = std::make_shared<const LatentTensor>(encode_latent(image, model));
    result.cost.encoder_runs = 1;
  }
  const QuantizedLatent q = quantize(*latent, model.gain, delta_beta);
  result.point.bpp = estimate_rate(q, image.pixelCount());
  result.cost.entropy_evals = 1;
  const Image recon = decode(q, model.gain, delta_beta, latent->geometry);
  result.cost.decoder_runs = 1;
  result.point.mse = mean_squared_error(image, recon);
  result.point.psnr = quality_psnr(result.point.mse);
  result.latent = std::move(latent);
  return result;
}

}  // namespace brm
