// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/autograd.h"

#include <gtest/gtest.h>

#include "grad_check.h"

namespace cdtse::ag {
namespace {

using testing::MaxGradientError;
using testing::RandomMatrix;

constexpr double kTol = 1e-6;

// Values bounded away from zero so ReLU/PReLU kinks stay outside the
// finite-difference stencil.
Matrix AwayFromZero(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng) {
  Matrix m = RandomMatrix(r, c, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = m.data()[i] < 0 ? -0.1 : 0.1;
  return m;
}

TEST(AutogradTest, ElementwiseOps) {
  std::mt19937_64 rng(1);
  Matrix a = RandomMatrix(3, 5, rng), b = RandomMatrix(3, 5, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Add(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Sub(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Mul(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Scale(v[0], -2.5); }, {a}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return OneMinus(v[0]); }, {a}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Sigmoid(v[0]); }, {a}), kTol);
  Matrix c = AwayFromZero(4, 6, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return Relu(v[0]); }, {c}), kTol);
  Matrix slope(1, 1);
  slope << 0.3;
  EXPECT_LT(MaxGradientError([](Tape &, const auto &v) { return PRelu(v[0], v[1]); },
                             {c, slope}),
            kTol);
}

TEST(AutogradTest, LinearOps) {
  std::mt19937_64 rng(2);
  Matrix w = RandomMatrix(4, 3, rng), x = RandomMatrix(3, 7, rng);
  Matrix b = RandomMatrix(4, 1, rng), v = RandomMatrix(3, 1, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return MatMul(p[0], p[1]); }, {w, x}),
            kTol);
  EXPECT_LT(MaxGradientError(
                [](Tape &, const auto &p) { return AddBias(MatMul(p[0], p[1]), p[2]); },
                {w, x, b}),
            kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return ScaleRows(p[0], p[1]); },
                             {x, v}),
            kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return MeanCols(p[0]); }, {x}), kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return ConcatRows(p[0], p[1]); },
                             {x, RandomMatrix(2, 7, rng)}),
            kTol);
}

TEST(AutogradTest, GlobalLayerNorm) {
  std::mt19937_64 rng(3);
  Matrix x = RandomMatrix(5, 9, rng, 2.0);
  Matrix gain = RandomMatrix(5, 1, rng), bias = RandomMatrix(5, 1, rng);
  EXPECT_LT(MaxGradientError(
                [](Tape &, const auto &p) { return GlobalLayerNorm(p[0], p[1], p[2]); },
                {x, gain, bias}),
            kTol);
}

TEST(AutogradTest, GlobalLayerNormStatistics) {
  std::mt19937_64 rng(4);
  Tape tape(false);
  Var x = tape.Constant(RandomMatrix(6, 11, rng, 3.0));
  Var y = GlobalLayerNorm(x, tape.Constant(Matrix::Ones(6, 1)), tape.Constant(Matrix::Zero(6, 1)));
  EXPECT_NEAR(y.value().mean(), 0.0, 1e-12);
  EXPECT_NEAR(y.value().array().square().mean(), 1.0, 1e-6);
}

TEST(AutogradTest, DepthwiseConvGradients) {
  std::mt19937_64 rng(5);
  for (int dilation : {1, 2, 4, 8}) {
    Matrix x = RandomMatrix(3, 10, rng), k = RandomMatrix(3, 3, rng), b = RandomMatrix(3, 1, rng);
    EXPECT_LT(MaxGradientError(
                  [dilation](Tape &, const auto &p) {
                    return DepthwiseConv(p[0], p[1], p[2], dilation);
                  },
                  {x, k, b}),
              kTol)
        << "dilation " << dilation;
  }
}

TEST(AutogradTest, DepthwiseConvMatchesDirectSum) {
  std::mt19937_64 rng(6);
  Matrix x = RandomMatrix(2, 12, rng), k = RandomMatrix(2, 5, rng), b = RandomMatrix(2, 1, rng);
  Tape tape(false);
  Matrix y = DepthwiseConv(tape.Constant(x), tape.Constant(k), tape.Constant(b), 2).value();
  for (int c = 0; c < 2; ++c)
    for (int t = 0; t < 12; ++t) {
      double expect = b(c, 0);
      for (int p = 0; p < 5; ++p) {
        int src = t + (p - 2) * 2;
        if (src >= 0 && src < 12) expect += k(c, p) * x(c, src);
      }
      EXPECT_NEAR(y(c, t), expect, 1e-12);
    }
}

TEST(AutogradTest, FramingOps) {
  std::mt19937_64 rng(7);
  Matrix sig = RandomMatrix(1, 23, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return Frames(p[0], 6, 3); }, {sig}),
            kTol);
  Matrix frames = RandomMatrix(6, 5, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return OverlapAdd(p[0], 3); }, {frames}),
            kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return FitLength(p[0], 15); }, {sig}),
            kTol);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return FitLength(p[0], 30); }, {sig}),
            kTol);
  Matrix few = RandomMatrix(3, 4, rng);
  EXPECT_LT(MaxGradientError([](Tape &, const auto &p) { return UpsampleCols(p[0], 11); }, {few}),
            kTol);
}

TEST(AutogradTest, FramesAndOverlapAddShapes) {
  Tape tape(false);
  Var sig = tape.Constant(Matrix::Ones(1, 8000));
  Var f = Frames(sig, 40, 20);
  EXPECT_EQ(f.cols(), 399);
  EXPECT_EQ(OverlapAdd(f, 20).cols(), 8000);
}

TEST(AutogradTest, Losses) {
  std::mt19937_64 rng(8);
  std::vector<double> ref = testing::RandomSignal(50, rng);
  Matrix est = RandomMatrix(1, 50, rng);
  for (int i = 0; i < 50; ++i) est(0, i) += ref[i];
  EXPECT_LT(MaxGradientError([&ref](Tape &, const auto &p) { return SiSdr(ref, p[0]); }, {est}),
            1e-5);
  Matrix logits = RandomMatrix(5, 1, rng);
  EXPECT_LT(MaxGradientError(
                [](Tape &, const auto &p) { return SoftmaxCrossEntropy(p[0], 3); }, {logits}),
            kTol);
  Tape tape(false);
  EXPECT_THROW(SoftmaxCrossEntropy(tape.Constant(logits), 5), ValueError);
}

TEST(AutogradTest, InferenceTapeStoresNoGradients) {
  Tape tape(false);
  Var a = tape.Leaf(Matrix::Ones(2, 2));
  EXPECT_FALSE(a.requires_grad());
  EXPECT_FALSE(Add(a, a).requires_grad());
  EXPECT_THROW(tape.Backward(MeanCols(MeanCols(a))), Error);
}

TEST(AutogradTest, SharedInputAccumulates) {
  Tape tape(true);
  Var a = tape.Leaf(Matrix::Constant(1, 1, 3.0));
  Var y = Mul(a, a);  // d(a^2)/da = 2a
  tape.Backward(Add(y, a));
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 7.0);
}

TEST(AutogradTest, ShapeMismatchesThrow) {
  Tape tape(false);
  Var a = tape.Constant(Matrix::Ones(2, 3)), b = tape.Constant(Matrix::Ones(3, 2));
  EXPECT_THROW(Add(a, b), ShapeError);
  EXPECT_THROW(ScaleRows(a, tape.Constant(Matrix::Ones(3, 1))), ShapeError);
  EXPECT_THROW(MatMul(a, a), ShapeError);
}

}  // namespace
}  // namespace cdtse::ag
