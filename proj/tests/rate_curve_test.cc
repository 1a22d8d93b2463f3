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
#include <sstream>

#include <gtest/gtest.h>

#include "brm/errors.h"
#include "brm/rate_curve.h"
#include "test_util.h"

namespace brm {
namespace {

using testing::CorpusImage;

TEST(SyntheticCurve, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(synthetic_eval(SyntheticLogLinearCurve(1.0, 0.0, 0.1, 1.0), 0.25), 0.25);
  EXPECT_DOUBLE_EQ(synthetic_eval(SyntheticLogLinearCurve(2.0, 0.0, 0.1, 1.0), 0.5), 0.25);
  EXPECT_NEAR(synthetic_eval(SyntheticLogLinearCurve(1.3, -2.0, 0.1, 10.0), 1.0),
              0.1353352832366127, 1e-15);
}

TEST(SyntheticCurve, PerturbationAndInverse) {
  SyntheticLogLinearCurve c(1.3, -2.0, 0.2, 10.0, 0.05, 3.0);
  const double beta = 2.0;
  const double expect = std::exp(1.3 * std::log(beta) - 2.0 + 0.05 * std::sin(3.0 * std::log(beta)));
  EXPECT_NEAR(c.eval(beta).bpp, expect, 1e-14);
  EXPECT_EQ(c.eval(beta).cost.entropy_evals, 1);
  EXPECT_EQ(c.eval(beta).cost.encoder_runs, 0);
  SyntheticLogLinearCurve line(1.3, -2.0, 0.2, 10.0);
  EXPECT_NEAR(line.bppAt(line.lineInverse(0.25)), 0.25, 1e-14);
  EXPECT_NEAR(line.betaTrain(), std::sqrt(2.0), 1e-15);
}

TEST(SyntheticCurve, Validation) {
  EXPECT_THROW(SyntheticLogLinearCurve(0.0, 0.0, 0.1, 1.0), DomainError);
  EXPECT_THROW(SyntheticLogLinearCurve(1.0, 0.0, 1.0, 0.1), DomainError);
  EXPECT_THROW(SyntheticLogLinearCurve(1.0, 0.0, 0.1, 1.0, 0.06, 1.0), DomainError);
  EXPECT_THROW(SyntheticLogLinearCurve(1.0, 0.0, 0.1, 1.0, 0.01, 4.0), DomainError);
  EXPECT_THROW(SyntheticLogLinearCurve(0.1, 0.0, 0.1, 1.0, 0.05, 3.0), DomainError);
  EXPECT_THROW(SyntheticLogLinearCurve(1.0, 0.0, 0.1, 1.0, 0.0, 0.0, 2.0), DomainError);
  SyntheticLogLinearCurve c(1.0, 0.0, 0.1, 1.0);
  EXPECT_THROW(c.eval(0.099), OutOfRangeError);
  EXPECT_THROW(c.eval(1.01), OutOfRangeError);
  EXPECT_NO_THROW(c.eval(0.1));
  EXPECT_FALSE(c.loss(0.5).has_value());
}

class CodecCurveTest : public ::testing::Test {
 protected:
  std::shared_ptr<const Image> image_ = CorpusImage("clock.pgm");
  CodecModel model_ = make_model(2, 0.015, 0.4, 2.0, 0.015);
};

TEST_F(CodecCurveTest, TrainBetaGivesDefaultRate) {
  auto curve = make_codec_curve(image_, model_, nullptr);
  EXPECT_EQ(curve->eval(model_.beta_train).bpp, evaluate(*image_, model_, 1.0).point.bpp);
  EXPECT_EQ(curve->modelId(), 2);
  EXPECT_DOUBLE_EQ(curve->betaMin(), 0.006);
  EXPECT_DOUBLE_EQ(curve->betaMax(), 0.03);
}

TEST_F(CodecCurveTest, CacheChargesOneEncode) {
  auto curve = make_codec_curve(image_, model_, std::make_shared<LatentCache>());
  const CurveSample a = curve->eval(0.01);
  const CurveSample b = curve->eval(0.01);
  EXPECT_EQ(a.bpp, b.bpp);
  EXPECT_EQ(a.cost.encoder_runs, 1);
  EXPECT_EQ(b.cost.encoder_runs, 0);
  EXPECT_EQ(b.cost.entropy_evals, 1);
}

TEST_F(CodecCurveTest, UncachedReencodesEveryProbe) {
  auto curve = make_codec_curve(image_, model_, nullptr);
  EXPECT_EQ(curve->eval(0.01).cost.encoder_runs, 1);
  EXPECT_EQ(curve->eval(0.01).cost.encoder_runs, 1);
  // The decoder reuses the latent of the validation in progress.
  const auto loss = curve->loss(0.01);
  ASSERT_TRUE(loss.has_value());
  EXPECT_EQ(loss->cost.encoder_runs, 0);
  EXPECT_EQ(loss->cost.decoder_runs, 1);
  EXPECT_EQ(loss->mse, evaluate(*image_, model_, 0.01 / 0.015).point.mse);
}

TEST_F(CodecCurveTest, SharedCacheAcrossCurves) {
  auto cache = std::make_shared<LatentCache>();
  auto first = make_codec_curve(image_, model_, cache);
  auto second = make_codec_curve(image_, model_, cache);
  EXPECT_EQ(first->eval(0.02).cost.encoder_runs, 1);
  EXPECT_EQ(second->eval(0.02).cost.encoder_runs, 0);
}

TEST_F(CodecCurveTest, RangeEndsOrderedAndChecked) {
  auto curve = make_codec_curve(image_, model_, std::make_shared<LatentCache>());
  EXPECT_GT(curve->eval(curve->betaMax()).bpp, curve->eval(curve->betaMin()).bpp);
  EXPECT_THROW(curve->eval(0.005), OutOfRangeError);
  EXPECT_THROW(curve->loss(0.031), OutOfRangeError);
  EXPECT_THROW(make_codec_curve(nullptr, model_, nullptr), GeometryError);
}

TEST_F(CodecCurveTest, AuditIsMonotone) {
  auto curve = make_codec_curve(image_, model_, std::make_shared<LatentCache>());
  const MonotonicityAudit audit = audit_monotone(*curve, 32);
  EXPECT_TRUE(audit.monotone);
  EXPECT_EQ(audit.samples.size(), 32u);
  EXPECT_FALSE(audit.first_violation.has_value());
}

TEST(TabulatedCurve, InterpolatesInLogLog) {
  TabulatedCurve c({{0.1, 0.1}, {1.0, 1.0}, {10.0, 4.0}});
  EXPECT_NEAR(c.eval(std::sqrt(0.1)).bpp, std::sqrt(0.1), 1e-14);
  EXPECT_NEAR(c.eval(std::sqrt(10.0)).bpp, 2.0, 1e-14);
  EXPECT_DOUBLE_EQ(c.eval(10.0).bpp, 4.0);
  EXPECT_NEAR(c.betaTrain(), 1.0, 1e-15);
  EXPECT_THROW(c.eval(11.0), OutOfRangeError);
}

TEST(TabulatedCurve, RejectsBadSamples) {
  EXPECT_THROW(TabulatedCurve({{1.0, 1.0}}), DomainError);
  EXPECT_THROW(TabulatedCurve({{1.0, 1.0}, {1.0, 2.0}}), DomainError);
  EXPECT_THROW(TabulatedCurve({{1.0, 2.0}, {2.0, 1.0}}), DomainError);
  EXPECT_THROW(TabulatedCurve({{1.0, 0.0}, {2.0, 1.0}}), DomainError);
}

TEST(TabulatedCurve, LoadsText) {
  std::istringstream in("# recorded\n0.5 0.2\n\n1.0 0.4  # mid\n2.0 0.9\n");
  const TabulatedCurve c = load_tabulated_curve(in);
  ASSERT_EQ(c.samples().size(), 3u);
  EXPECT_DOUBLE_EQ(c.samples()[2].bpp, 0.9);
  std::istringstream bad("0.5 0.2\n1.0\n");
  try {
    load_tabulated_curve(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(MemoizedCurve, RepeatsAreFree) {
  SyntheticLogLinearCurve inner(1.0, 0.0, 0.1, 1.0);
  MemoizedCurve memo(inner);
  EXPECT_EQ(memo.eval(0.5).cost.entropy_evals, 1);
  const CurveSample again = memo.eval(0.5);
  EXPECT_EQ(again.cost.entropy_evals, 0);
  EXPECT_DOUBLE_EQ(again.bpp, 0.5);
}

TEST(GeometricGrid, ExactEnds) {
  const auto g = geometric_grid(0.3, 1.4, 32);
  ASSERT_EQ(g.size(), 32u);
  EXPECT_EQ(g.front(), 0.3);
  EXPECT_EQ(g.back(), 1.4);
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    EXPECT_NEAR(g[i] / g[i - 1], g[i + 1] / g[i], 1e-12);
  }
  EXPECT_THROW(geometric_grid(0.0, 1.0, 4), DomainError);
  EXPECT_THROW(geometric_grid(1.0, 2.0, 1), DomainError);
}

// bpp rises and then dips once past beta = 0.5.
class DippingCurve final : public RateCurve {
 public:
  CurveSample eval(double beta) override {
    checkRange(beta);
    return {beta < 0.5 ? beta : beta - 0.2, {0, 1, 0}};
  }
  double betaMin() const override { return 0.1; }
  double betaMax() const override { return 1.0; }
  double betaTrain() const override { return 0.3; }
};

TEST(AuditMonotone, FlagsDecrease) {
  TabulatedCurve flat({{1.0, 1.0}, {2.0, 1.0}});
  EXPECT_TRUE(audit_monotone(flat, 8).monotone);
  DippingCurve dip;
  const MonotonicityAudit audit = audit_monotone(dip, 16);
  EXPECT_FALSE(audit.monotone);
  ASSERT_TRUE(audit.first_violation.has_value());
  EXPECT_LT(audit.samples[*audit.first_violation].beta, 0.5);
  EXPECT_GE(audit.samples[*audit.first_violation + 1].beta, 0.5);
}

}  // namespace
}  // namespace brm
