// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_SPATIAL_H_
#define CDTSE_SPATIAL_H_

#include <optional>
#include <span>

#include "cdtse/autograd.h"
#include "cdtse/model_config.h"
#include "cdtse/params.h"

// Multi-channel fusion of encoder representations. Each operation has a
// plain matrix form and a tape form; both compute the same values.
namespace cdtse::spatial {

// Floor on the cosine denominator so constant (silent) rows give phi = 0
// rather than NaN. Above the floor the cosine is exact, so identical rows give
// phi = 1 and the scores are scale invariant.
inline constexpr double kCosineFloor = 1e-8;

// Per-row cosine similarity after zero-meaning each row:
//   dot(a, b) / max(|a| |b|, kCosineFloor).
// Shapes must match and have at least two frames.
Vector RowCosine(const Matrix &w1, const Matrix &w2);

// p = exp(phi) / (e + exp(phi)): a two-way softmax of phi against the
// all-ones self-similarity.
Vector PairwiseSoftmax(const Vector &phi);

// s = 1 - p repeated over `frames` columns.
Matrix DecorrelationScores(const Vector &p, int frames);

// W2 scaled row-wise by 1 - p(W1, W2).
Matrix ChannelDecorrelate(const Matrix &w1, const Matrix &w2);
// W2 scaled row-wise by p(W1, W2); the correlation ablation.
Matrix ChannelCorrelate(const Matrix &w1, const Matrix &w2);

// Element-wise sum of all representations, then row scaling by `emb`.
Matrix ParallelFuse(std::span<const Matrix> reps,
                    const std::optional<Vector> &emb = std::nullopt);

// W1 + adapt(ChannelDecorrelate(W1, W2), emb).
Matrix CdFuse(const Matrix &w1, const Matrix &w2,
              const std::optional<Vector> &emb = std::nullopt);
// W1 + adapt(ChannelCorrelate(W1, W2), emb).
Matrix CcFuse(const Matrix &w1, const Matrix &w2,
              const std::optional<Vector> &emb = std::nullopt);

// IPD branch: features (F x Tf) -> 1x1 conv + ReLU -> upsample to the
// frame count of `adapted` -> conv block -> concat with `adapted` -> 1x1
// conv back to the row count of `adapted`.
Matrix IpdFuse(const Matrix &adapted, const Matrix &ipd, const ParameterSet &params,
               const ModelConfig &cfg);

// ---- tape forms --------------------------------------------------------------

ag::Var RowCosine(ag::Var w1, ag::Var w2);
ag::Var PairwiseSoftmax(ag::Var phi);
ag::Var ChannelDecorrelate(ag::Var w1, ag::Var w2);
ag::Var ChannelCorrelate(ag::Var w1, ag::Var w2);
ag::Var ParallelFuse(std::span<const ag::Var> reps, std::optional<ag::Var> emb);
ag::Var CdFuse(ag::Var w1, ag::Var w2, std::optional<ag::Var> emb);
ag::Var CcFuse(ag::Var w1, ag::Var w2, std::optional<ag::Var> emb);
ag::Var IpdFuse(ag::Var adapted, ag::Var ipd, ParamBinder &params, const ModelConfig &cfg);

}  // namespace cdtse::spatial

#endif  // CDTSE_SPATIAL_H_
