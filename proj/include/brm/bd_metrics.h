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

#ifndef BRM_BD_METRICS_H_
#define BRM_BD_METRICS_H_

#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

#include <Eigen/Core>

namespace brm {

struct RdPoint {
  double bpp = 0.0;
  double quality_db = 0.0;
};

// Rate-distortion curve, kept sorted by strictly increasing bpp.
class RdCurve {
 public:
  RdCurve() = default;
  // Sorts by bpp. Throws DomainError on non-positive or repeated bpp, or on
  // non-finite quality.
  explicit RdCurve(std::vector<RdPoint> points);

  const std::vector<RdPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

  // True when quality is non-decreasing with bpp. A failing audit is a
  // warning for callers, not an error.
  bool qualityMonotone() const;

 private:
  std::vector<RdPoint> points_;
};

struct BdResult {
  double bd_rate_percent = 0.0;
  double quality_low = 0.0;
  double quality_high = 0.0;
};

// Bjontegaard delta rate of `test` against `anchor`: log10(bpp) fitted as a
// cubic in quality (least squares beyond four points), difference averaged
// over the overlapping quality interval by a 1000-interval trapezoid rule.
BdResult bd_rate(const RdCurve& anchor, const RdCurve& test);

// Least-squares polynomial coefficients (lowest degree first) of y on x.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> polyfit(
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& x,
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& y, int degree);

template <typename Scalar>
Scalar polyval(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& coeffs,
               Scalar x) {
  Scalar acc = 0;
  for (Eigen::Index i = coeffs.size() - 1; i >= 0; --i) acc = acc * x + coeffs[i];
  return acc;
}

// 10 log10(255^2 / mse); +infinity when mse == 0.
double quality_psnr(double mse);

// 100 |achieved - target| / target.
double bit_difference(double achieved_bpp, double target_bpp);

// CSV with header "bpp,quality_db".
RdCurve read_rd_curve_csv(std::istream& in);
RdCurve read_rd_curve_csv(const std::filesystem::path& path);
void write_rd_curve_csv(std::ostream& out, const RdCurve& curve);
void write_rd_curve_csv(const std::filesystem::path& path, const RdCurve& curve);

}  // namespace brm

#endif  // BRM_BD_METRICS_H_
