// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/objective.h"

#include <cmath>

#include "cdtse/metrics.h"

namespace cdtse::objective {

namespace {

void CheckAlpha(double alpha) {
  if (!(alpha >= 0.0)) throw ValueError("loss weight alpha must be >= 0");
}

}  // namespace

Vector SpeakerLogits(const Vector &emb, const Matrix &classifier) {
  if (classifier.cols() != emb.size())
    throw ShapeError("classifier expects embeddings of length " +
                     std::to_string(classifier.cols()) + ", got " +
                     std::to_string(emb.size()));
  return classifier * emb;
}

double CrossEntropy(const Vector &logits, int label) {
  if (label < 0 || label >= logits.size())
    throw ValueError("speaker label " + std::to_string(label) + " outside [0, " +
                     std::to_string(logits.size()) + ")");
  const double zmax = logits.maxCoeff();
  return std::log((logits.array() - zmax).exp().sum()) + zmax - logits[label];
}

LossBreakdown MultitaskLoss(std::span<const double> target,
                            std::span<const double> estimate, const Vector &emb,
                            int label, const Matrix &classifier, double alpha) {
  CheckAlpha(alpha);
  LossBreakdown out;
  out.alpha = alpha;
  out.neg_sisdr = -metrics::SiSdrUnclamped(target, estimate);
  out.ce = CrossEntropy(SpeakerLogits(emb, classifier), label);
  out.total = out.neg_sisdr + alpha * out.ce;
  return out;
}

LossVars MultitaskLoss(std::span<const double> target, ag::Var estimate, ag::Var emb,
                       int label, ag::Var classifier, double alpha) {
  CheckAlpha(alpha);
  LossVars out;
  out.neg_sisdr = ag::Scale(ag::SiSdr(target, estimate), -1.0);
  out.ce = ag::SoftmaxCrossEntropy(ag::MatMul(classifier, emb), label);
  out.total = ag::Add(out.neg_sisdr, ag::Scale(out.ce, alpha));
  return out;
}

}  // namespace cdtse::objective
