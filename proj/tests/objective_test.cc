// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/objective.h"

#include <gtest/gtest.h>

#include "cdtse/metrics.h"
#include "cdtse/tasnet.h"
#include "grad_check.h"

namespace cdtse::objective {
namespace {

using testing::RandomMatrix;
using testing::RandomSignal;

struct Case {
  std::vector<double> target, estimate;
  Vector emb;
  Matrix classifier;
};

Case MakeCase(std::mt19937_64 &rng, int k = 4, int n = 6, size_t len = 200) {
  Case c;
  c.target = RandomSignal(len, rng);
  c.estimate = RandomSignal(len, rng, 0.5);
  for (size_t i = 0; i < len; ++i) c.estimate[i] += c.target[i];
  c.emb = RandomMatrix(n, 1, rng);
  c.classifier = RandomMatrix(k, n, rng);
  return c;
}

// log-sum-exp oracle written independently of the library.
double CeOracle(const Vector &logits, int label) {
  double m = logits.maxCoeff(), s = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) s += std::exp(logits[i] - m);
  return m + std::log(s) - logits[label];
}

TEST(MultitaskLossTest, AlphaZeroIsNegativeSiSdr) {
  std::mt19937_64 rng(1);
  Case c = MakeCase(rng);
  LossBreakdown l = MultitaskLoss(c.target, c.estimate, c.emb, 2, c.classifier, 0.0);
  EXPECT_EQ(l.total, -metrics::SiSdrUnclamped(c.target, c.estimate));
  EXPECT_EQ(l.alpha, 0.0);
}

TEST(MultitaskLossTest, UniformLogitsGiveLogK) {
  std::mt19937_64 rng(2);
  Case c = MakeCase(rng, 7);
  LossBreakdown l = MultitaskLoss(c.target, c.estimate, Vector::Zero(6), 3,
                                  c.classifier, 0.5);
  EXPECT_NEAR(l.ce, std::log(7.0), 1e-12);
}

TEST(MultitaskLossTest, ComposesComponents) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Case c = MakeCase(rng);
    const double a = -metrics::SiSdrUnclamped(c.target, c.estimate);
    const double b = CeOracle(c.classifier * c.emb, trial % 4);
    LossBreakdown l = MultitaskLoss(c.target, c.estimate, c.emb, trial % 4, c.classifier, 0.5);
    EXPECT_NEAR(l.neg_sisdr, a, 1e-12);
    EXPECT_NEAR(l.ce, b, 1e-12);
    EXPECT_NEAR(l.total, a + 0.5 * b, 1e-9);
    EXPECT_NEAR(l.total, l.neg_sisdr + l.alpha * l.ce, 1e-9);
    EXPECT_GE(l.ce, 0.0);
  }
}

TEST(MultitaskLossTest, ScaleInvariantInEstimate) {
  std::mt19937_64 rng(4);
  Case c = MakeCase(rng);
  const double base = MultitaskLoss(c.target, c.estimate, c.emb, 0, c.classifier, 0.5).total;
  for (double s : {0.01, 2.0, 300.0}) {
    std::vector<double> scaled = c.estimate;
    for (auto &v : scaled) v *= s;
    EXPECT_NEAR(MultitaskLoss(c.target, scaled, c.emb, 0, c.classifier, 0.5).total, base, 1e-9);
  }
}

TEST(MultitaskLossTest, CeApproachesZeroWhenSaturated) {
  Vector logits = Vector::Zero(5);
  logits[2] = 60.0;
  EXPECT_LT(CrossEntropy(logits, 2), 1e-20);
  EXPECT_GE(CrossEntropy(logits, 2), 0.0);
  EXPECT_NEAR(CrossEntropy(logits, 0), 60.0, 1e-9);
}

TEST(MultitaskLossTest, Errors) {
  std::mt19937_64 rng(5);
  Case c = MakeCase(rng);
  EXPECT_THROW(MultitaskLoss(c.target, c.estimate, c.emb, 4, c.classifier, 0.5), ValueError);
  EXPECT_THROW(MultitaskLoss(c.target, c.estimate, c.emb, -1, c.classifier, 0.5), ValueError);
  EXPECT_THROW(MultitaskLoss(c.target, c.estimate, c.emb, 0, c.classifier, -0.1), ValueError);
  std::vector<double> short_est(c.estimate.begin(), c.estimate.end() - 1);
  EXPECT_THROW(MultitaskLoss(c.target, short_est, c.emb, 0, c.classifier, 0.5), ShapeError);
}

TEST(SpeakerLogitsTest, Probes) {
  std::mt19937_64 rng(6);
  Matrix w = RandomMatrix(4, 6, rng);
  EXPECT_EQ(SpeakerLogits(Vector::Zero(6), w).cwiseAbs().maxCoeff(), 0.0);
  for (int j = 0; j < 6; ++j) {
    Vector e = Vector::Zero(6);
    e[j] = 1.0;
    EXPECT_TRUE(SpeakerLogits(e, w) == w.col(j));
  }
  EXPECT_THROW(SpeakerLogits(Vector::Ones(5), w), ShapeError);
}

TEST(SpeakerLogitsTest, CrossEntropyGradientWrtClassifier) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix w = RandomMatrix(4, 6, rng);
    Vector e = RandomMatrix(6, 1, rng);
    const int label = trial % 4;
    ag::Tape tape(true);
    ag::Var wv = tape.Leaf(w);
    ag::Var ce = ag::SoftmaxCrossEntropy(ag::MatMul(wv, tape.Constant(e)), label);
    tape.Backward(ce);
    Matrix numeric = testing::NumericGradient(
        [&] { return CrossEntropy(SpeakerLogits(e, w), label); }, w);
    EXPECT_LT(testing::RelativeError(wv.grad(), numeric), 1e-5);
    EXPECT_NEAR(ce.value()(0, 0), CeOracle(w * e, label), 1e-12);
  }
}

TEST(MultitaskLossTest, TapeFormMatchesPlainForm) {
  std::mt19937_64 rng(8);
  Case c = MakeCase(rng);
  ag::Tape tape(false);
  Matrix est = Eigen::Map<const Matrix>(c.estimate.data(), 1, c.estimate.size());
  LossVars v = MultitaskLoss(c.target, tape.Constant(est), tape.Constant(c.emb), 1,
                             tape.Constant(c.classifier), 0.5);
  LossBreakdown l = MultitaskLoss(c.target, c.estimate, c.emb, 1, c.classifier, 0.5);
  EXPECT_NEAR(v.total.value()(0, 0), l.total, 1e-10);
  EXPECT_NEAR(v.ce.value()(0, 0), l.ce, 1e-12);
  EXPECT_NEAR(v.neg_sisdr.value()(0, 0), l.neg_sisdr, 1e-10);
}

// One small gradient step on a fixed micro-batch lowers the full loss.
TEST(MultitaskLossTest, GradientStepDescends) {
  ModelConfig cfg = ModelConfig::Micro();
  for (uint64_t seed = 0; seed < 10; ++seed) {
    ParameterSet params = InitParameters(cfg, seed);
    std::mt19937_64 rng(seed + 50);
    struct Item {
      MultichannelMixture mix;
      Waveform enr;
      std::vector<double> target;
      int label;
    };
    std::vector<Item> batch;
    for (int b = 0; b < 3; ++b) {
      std::vector<double> t = RandomSignal(64, rng, 0.3);
      std::vector<Waveform> ch;
      for (int c = 0; c < 2; ++c) {
        auto n = RandomSignal(64, rng, 0.3);
        for (size_t i = 0; i < n.size(); ++i) n[i] += t[i];
        ch.push_back(Waveform{n, 8000});
      }
      batch.push_back({MultichannelMixture(std::move(ch)),
                       Waveform{RandomSignal(48, rng, 0.3), 8000}, t, b % 3});
    }
    auto loss = [&](const ParameterSet &ps, ParameterSet *grads) {
      double total = 0.0;
      for (const Item &it : batch) {
        ag::Tape tape(grads != nullptr);
        ParamBinder binder(&tape, ps, grads != nullptr);
        auto r = tasnet::Forward(binder, cfg, it.mix, it.enr);
        auto l = MultitaskLoss(it.target, r.estimate, r.embedding, it.label,
                               binder("classifier.weight"), cfg.alpha);
        total += l.total.value()(0, 0) / batch.size();
        if (grads) {
          tape.Backward(l.total);
          binder.AccumulateGradients(grads);
        }
      }
      return total;
    };
    ParameterSet grads = ZerosLike(params);
    const double before = loss(params, &grads);
    const double gnorm2 = SquaredNorm(grads);
    ASSERT_GT(gnorm2, 0.0);
    const double step = 1e-4 / std::sqrt(gnorm2);
    ParameterSet moved = params;
    for (auto &[name, m] : moved) m -= step * grads.at(name) / batch.size();
    EXPECT_LT(loss(moved, nullptr), before) << "seed " << seed;
  }
}

}  // namespace
}  // namespace cdtse::objective
