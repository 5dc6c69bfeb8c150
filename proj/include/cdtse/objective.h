// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_OBJECTIVE_H_
#define CDTSE_OBJECTIVE_H_

#include <span>

#include "cdtse/autograd.h"

namespace cdtse::objective {

struct LossBreakdown {
  double total = 0.0;
  double neg_sisdr = 0.0;  // dB, negated
  double ce = 0.0;         // nats
  double alpha = 0.0;
};

// Bias-free speaker classifier: logits = classifier * emb, classifier is K x N.
Vector SpeakerLogits(const Vector &emb, const Matrix &classifier);

// -log softmax(logits)[label], natural log.
double CrossEntropy(const Vector &logits, int label);

// -SiSDR(target, estimate) + alpha * CE(label, softmax(classifier * emb)).
// The SiSDR term is the unclamped, epsilon-guarded value.
LossBreakdown MultitaskLoss(std::span<const double> target,
                            std::span<const double> estimate, const Vector &emb,
                            int label, const Matrix &classifier, double alpha);

struct LossVars {
  ag::Var total;
  ag::Var neg_sisdr;
  ag::Var ce;
};

// Tape form; estimate is 1 x S, emb N x 1, classifier K x N.
LossVars MultitaskLoss(std::span<const double> target, ag::Var estimate, ag::Var emb,
                       int label, ag::Var classifier, double alpha);

}  // namespace cdtse::objective

#endif  // CDTSE_OBJECTIVE_H_
