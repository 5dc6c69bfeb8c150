// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/optim.h"

#include <gtest/gtest.h>

#include "test_util.h"

namespace cdtse::optim {
namespace {

ParameterSet One(double value) { return {{"w", Matrix::Constant(1, 1, value)}}; }

TEST(ClipGradNormTest, ScalesOnlyAboveThreshold) {
  ParameterSet g = {{"a", Matrix::Constant(1, 1, 6.0)}, {"b", Matrix::Constant(1, 2, 0.0)}};
  g["b"](0, 1) = 8.0;
  EXPECT_DOUBLE_EQ(ClipGradNorm(&g, 5.0), 10.0);
  EXPECT_DOUBLE_EQ(g["a"](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g["b"](0, 1), 4.0);
  EXPECT_NEAR(ClipGradNorm(&g, 5.0), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(g["a"](0, 0), 3.0);
  EXPECT_THROW(ClipGradNorm(&g, 0.0), ValueError);
}

// Scalar transcription of the bias-corrected update, with the float32
// rounding applied after every step.
TEST(AdamTest, MatchesScalarRecurrence) {
  ParameterSet p = One(0.5);
  Adam adam(p);
  double w = 0.5, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -1.2, 0.05, 2.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    adam.Step(&p, One(g), 1e-2);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w = static_cast<float>(w - 1e-2 * mh / (std::sqrt(vh) + 1e-8));
    EXPECT_EQ(p["w"](0, 0), w) << "step " << t;
  }
  EXPECT_EQ(adam.step(), 4);
}

TEST(AdamTest, MinimizesQuadratic) {
  std::mt19937_64 rng(1);
  ParameterSet p = {{"x", testing::RandomMatrix(3, 4, rng, 2.0)}};
  Adam adam(p);
  for (int i = 0; i < 2000; ++i) adam.Step(&p, {{"x", 2.0 * p["x"]}}, 0.01);
  EXPECT_LT(p["x"].cwiseAbs().maxCoeff(), 0.02);
}

TEST(AdamTest, RestoreContinuesExactly) {
  ParameterSet a = One(1.0), b;
  Adam first(a);
  for (double g : {0.2, 0.4}) first.Step(&a, One(g), 0.1);
  b = a;
  Adam resumed(b);
  resumed.Restore(first.step(), first.m(), first.v());
  first.Step(&a, One(-0.7), 0.1);
  resumed.Step(&b, One(-0.7), 0.1);
  EXPECT_EQ(a["w"](0, 0), b["w"](0, 0));
  EXPECT_THROW(resumed.Restore(1, {{"q", Matrix::Zero(1, 1)}}, {{"q", Matrix::Zero(1, 1)}}),
               ShapeError);
}

}  // namespace
}  // namespace cdtse::optim
