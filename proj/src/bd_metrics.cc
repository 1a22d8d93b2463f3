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

#include "brm/bd_metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/QR>

#include "brm/errors.h"

namespace brm {

RdCurve::RdCurve(std::vector<RdPoint> points) : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].bpp > 0.0) || !std::isfinite(points_[i].bpp)) {
      throw DomainError("rd curve: bpp must be positive and finite");
    }
    if (!std::isfinite(points_[i].quality_db)) {
      throw DomainError("rd curve: quality must be finite");
    }
    if (i > 0 && !(points_[i].bpp > points_[i - 1].bpp)) {
      throw DomainError("rd curve: bpp values must be distinct");
    }
  }
}

bool RdCurve::qualityMonotone() const {
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].quality_db < points_[i - 1].quality_db) return false;
  }
  return true;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> polyfit(
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& x,
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& y, int degree) {
  if (x.size() != y.size() || x.size() < degree + 1) {
    throw DomainError("polyfit: need at least degree + 1 points");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vander(x.size(), degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Scalar p = 1;
    for (int j = 0; j <= degree; ++j, p *= x[i]) vander(i, j) = p;
  }
  return vander.colPivHouseholderQr().solve(y);
}

template Eigen::VectorXd polyfit<double>(const Eigen::Ref<const Eigen::VectorXd>&,
                                         const Eigen::Ref<const Eigen::VectorXd>&, int);

namespace {

constexpr int kTrapezoidIntervals = 1000;

// Cubic fit of log10(bpp) against quality normalized to [-1, 1] over
// [center - half, center + half]; the normalization only conditions the
// Vandermonde system.
struct LogRateFit {
  Eigen::VectorXd coeffs;
  double center = 0.0;
  double half = 1.0;

  double operator()(double quality) const {
    return polyval<double>(coeffs, (quality - center) / half);
  }
};

LogRateFit FitLogRate(const RdCurve& curve, double center, double half) {
  const auto& pts = curve.points();
  Eigen::VectorXd q(static_cast<Eigen::Index>(pts.size()));
  Eigen::VectorXd r(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    q[i] = (pts[static_cast<std::size_t>(i)].quality_db - center) / half;
    r[i] = std::log10(pts[static_cast<std::size_t>(i)].bpp);
  }
  return {polyfit<double>(q, r, 3), center, half};
}

}  // namespace

BdResult bd_rate(const RdCurve& anchor, const RdCurve& test) {
  if (anchor.size() < 4 || test.size() < 4) {
    throw DomainError("bd_rate: each curve needs at least 4 points");
  }
  auto range = [](const RdCurve& c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const RdPoint& p : c.points()) {
      lo = std::min(lo, p.quality_db);
      hi = std::max(hi, p.quality_db);
    }
    return std::pair{lo, hi};
  };
  const auto [a_lo, a_hi] = range(anchor);
  const auto [t_lo, t_hi] = range(test);
  const double lo = std::max(a_lo, t_lo);
  const double hi = std::min(a_hi, t_hi);
  if (!(hi > lo)) throw DomainError("bd_rate: quality ranges do not overlap");

  const double center = 0.5 * (std::min(a_lo, t_lo) + std::max(a_hi, t_hi));
  const double half = std::max(0.5 * (std::max(a_hi, t_hi) - std::min(a_lo, t_lo)), 1e-12);
  const LogRateFit fa = FitLogRate(anchor, center, half);
  const LogRateFit ft = FitLogRate(test, center, half);

  const double h = (hi - lo) / kTrapezoidIntervals;
  double integral = 0.0;
  for (int i = 0; i <= kTrapezoidIntervals; ++i) {
    const double q = lo + h * i;
    const double w = (i == 0 || i == kTrapezoidIntervals) ? 0.5 : 1.0;
    integral += w * (ft(q) - fa(q));
  }
  const double avg = integral * h / (hi - lo);
  return {(std::pow(10.0, avg) - 1.0) * 100.0, lo, hi};
}

double quality_psnr(double mse) {
  if (mse < 0.0 || std::isnan(mse)) throw DomainError("quality_psnr: mse must be >= 0");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double bit_difference(double achieved_bpp, double target_bpp) {
  if (!(target_bpp > 0.0)) throw DomainError("bit_difference: target must be positive");
  return 100.0 * std::abs(achieved_bpp - target_bpp) / target_bpp;
}

RdCurve read_rd_curve_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<RdPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      if (line != "bpp,quality_db") throw ParseError("expected header 'bpp,quality_db'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected two columns", line_no);
    try {
      std::size_t used = 0;
      RdPoint p;
      p.bpp = std::stod(line.substr(0, comma), &used);
      const std::string rest = line.substr(comma + 1);
      p.quality_db = std::stod(rest, &used);
      if (rest.find_first_not_of(" \t", used) != std::string::npos) {
        throw ParseError("trailing characters", line_no);
      }
      points.push_back(p);
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", line_no);
    }
  }
  if (!header_seen) throw ParseError("empty rd curve file");
  return RdCurve(std::move(points));
}

RdCurve read_rd_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_rd_curve_csv(in);
}

void write_rd_curve_csv(std::ostream& out, const RdCurve& curve) {
  out << "bpp,quality_db\n";
  for (const RdPoint& p : curve.points()) {
    out << std::setprecision(17) << p.bpp << ',' << p.quality_db << '\n';
  }
}

void write_rd_curve_csv(const std::filesystem::path& path, const RdCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_rd_curve_csv(out, curve);
}

}  // namespace brm
