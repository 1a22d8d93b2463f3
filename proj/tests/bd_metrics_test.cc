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

#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "brm/bd_metrics.h"
#include "brm/errors.h"

namespace brm {
namespace {

RdCurve Anchor() { return RdCurve({{0.1, 30}, {0.2, 33}, {0.4, 36}, {0.8, 39}}); }

RdCurve ScaleRate(const RdCurve& c, double f) {
  std::vector<RdPoint> pts = c.points();
  for (auto& p : pts) p.bpp *= f;
  return RdCurve(pts);
}

// Lagrange cubic through four (quality, log10 bpp) points.
double Lagrange(const std::vector<RdPoint>& p, double q) {
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < 4; ++j) {
      if (j != i) w *= (q - p[j].quality_db) / (p[i].quality_db - p[j].quality_db);
    }
    sum += w * std::log10(p[i].bpp);
  }
  return sum;
}

// Composite Simpson on the overlap, independent of the library's quadrature.
double DirectBd(const RdCurve& a, const RdCurve& t) {
  const double lo = std::max(a.points().front().quality_db, t.points().front().quality_db);
  const double hi = std::min(a.points().back().quality_db, t.points().back().quality_db);
  const int n = 20000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double q = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * (Lagrange(t.points(), q) - Lagrange(a.points(), q));
  }
  return (std::pow(10.0, s * h / 3.0 / (hi - lo)) - 1.0) * 100.0;
}

TEST(BdRate, IdenticalCurvesGiveZero) {
  EXPECT_LT(std::abs(bd_rate(Anchor(), Anchor()).bd_rate_percent), 1e-9);
}

TEST(BdRate, UniformScaling) {
  EXPECT_NEAR(bd_rate(Anchor(), ScaleRate(Anchor(), 1.1)).bd_rate_percent, 10.0, 0.1);
  EXPECT_NEAR(bd_rate(Anchor(), ScaleRate(Anchor(), 0.5)).bd_rate_percent, -50.0, 0.1);
  const BdResult r = bd_rate(Anchor(), ScaleRate(Anchor(), 0.5));
  EXPECT_DOUBLE_EQ(r.quality_low, 30.0);
  EXPECT_DOUBLE_EQ(r.quality_high, 39.0);
}

TEST(BdRate, MatchesDirectIntegration) {
  const RdCurve test({{0.12, 29.5}, {0.21, 33.4}, {0.37, 35.8}, {0.9, 40.1}});
  EXPECT_NEAR(bd_rate(Anchor(), test).bd_rate_percent, DirectBd(Anchor(), test), 1e-3);
  EXPECT_NEAR(bd_rate(test, Anchor()).bd_rate_percent, DirectBd(test, Anchor()), 1e-3);
}

TEST(BdRate, SignIsAntisymmetric) {
  const RdCurve test({{0.12, 29.5}, {0.21, 33.4}, {0.37, 35.8}, {0.9, 40.1}});
  const double ab = bd_rate(Anchor(), test).bd_rate_percent;
  const double ba = bd_rate(test, Anchor()).bd_rate_percent;
  ASSERT_NE(ab, 0.0);
  EXPECT_EQ(std::signbit(ab), !std::signbit(ba));
}

TEST(BdRate, LeastSquaresBeyondFourPoints) {
  std::vector<RdPoint> five{{0.06, 27}, {0.12, 30.2}, {0.25, 33.1}, {0.5, 36.4}, {0.75, 38.0}};
  const RdCurve a(five);
  EXPECT_LT(std::abs(bd_rate(a, a).bd_rate_percent), 1e-9);
  EXPECT_NEAR(bd_rate(a, ScaleRate(a, 1.1)).bd_rate_percent, 10.0, 0.1);
}

TEST(BdRate, Errors) {
  const RdCurve three({{0.1, 30}, {0.2, 33}, {0.4, 36}});
  EXPECT_THROW(bd_rate(three, Anchor()), DomainError);
  const RdCurve apart({{0.1, 50}, {0.2, 53}, {0.4, 56}, {0.8, 59}});
  EXPECT_THROW(bd_rate(Anchor(), apart), DomainError);
}

TEST(RdCurve, SortsAndValidates) {
  const RdCurve c({{0.4, 36}, {0.1, 30}});
  EXPECT_EQ(c.points().front().bpp, 0.1);
  EXPECT_TRUE(c.qualityMonotone());
  EXPECT_FALSE(RdCurve({{0.1, 33}, {0.2, 30}}).qualityMonotone());
  EXPECT_THROW(RdCurve({{0.0, 30}}), DomainError);
  EXPECT_THROW(RdCurve({{0.1, 30}, {0.1, 31}}), DomainError);
  EXPECT_THROW(RdCurve({{0.1, std::numeric_limits<double>::infinity()}}), DomainError);
}

TEST(Polyfit, RecoversCubic) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(7, -1.0, 1.0);
  Eigen::VectorXd y = (1.0 - 2.0 * x.array() + 0.5 * x.array().cube()).matrix();
  const Eigen::VectorXd c = polyfit<double>(x, y, 3);
  EXPECT_NEAR(c[0], 1.0, 1e-12);
  EXPECT_NEAR(c[1], -2.0, 1e-12);
  EXPECT_NEAR(c[2], 0.0, 1e-12);
  EXPECT_NEAR(c[3], 0.5, 1e-12);
  EXPECT_NEAR(polyval<double>(c, 0.3), 1.0 - 0.6 + 0.5 * 0.027, 1e-12);
  EXPECT_THROW(polyfit<double>(x.head(3), y.head(3), 3), DomainError);
}

TEST(QualityPsnr, Examples) {
  EXPECT_NEAR(quality_psnr(255.0 * 255.0), 0.0, 1e-12);
  EXPECT_NEAR(quality_psnr(65.025), 30.0, 1e-12);
  EXPECT_TRUE(std::isinf(quality_psnr(0.0)));
  EXPECT_THROW(quality_psnr(-1.0), DomainError);
}

TEST(BitDifference, Examples) {
  EXPECT_NEAR(bit_difference(0.26, 0.25), 4.0, 1e-12);
  EXPECT_EQ(bit_difference(0.25, 0.25), 0.0);
  EXPECT_NEAR(bit_difference(0.12 * 1.09, 0.12), 9.0, 1e-12);
  EXPECT_LE(bit_difference(0.12 * 1.09, 0.12), 10.0);
  EXPECT_THROW(bit_difference(0.1, 0.0), DomainError);
}

TEST(RdCsv, RoundTrip) {
  std::stringstream buf;
  write_rd_curve_csv(buf, Anchor());
  const RdCurve back = read_rd_curve_csv(buf);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.points()[i].bpp, Anchor().points()[i].bpp);
    EXPECT_EQ(back.points()[i].quality_db, Anchor().points()[i].quality_db);
  }
}

TEST(RdCsv, ParseErrorsCarryLine) {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_rd_curve_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("bpp,psnr\n"), 1);
  EXPECT_EQ(line_of("bpp,quality_db\n0.1,30\n0.2\n"), 3);
  EXPECT_EQ(line_of("bpp,quality_db\n0.1,30\nx,31\n"), 3);
  EXPECT_EQ(line_of("bpp,quality_db\n0.1,30 dB\n"), 2);
}

}  // namespace
}  // namespace brm
