// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/spatial.h"

#include <algorithm>

#include <cmath>
#include <numbers>

#include "cdtse/layers.h"

namespace cdtse::spatial {

namespace {

void CheckPair(const Matrix &w1, const Matrix &w2) {
  if (w1.rows() != w2.rows() || w1.cols() != w2.cols())
    throw ShapeError("channel representations differ in shape: " +
                     std::to_string(w1.rows()) + "x" + std::to_string(w1.cols()) +
                     " vs " + std::to_string(w2.rows()) + "x" +
                     std::to_string(w2.cols()));
}

void CheckEmbedding(const Matrix &rep, const Vector &emb) {
  if (emb.size() != rep.rows())
    throw ShapeError("speaker embedding length " + std::to_string(emb.size()) +
                     " != representation rows " + std::to_string(rep.rows()));
}

Matrix Centered(const Matrix &w) { return w.colwise() - w.rowwise().mean(); }

}  // namespace

Vector RowCosine(const Matrix &w1, const Matrix &w2) {
  CheckPair(w1, w2);
  if (w1.cols() < 2) throw ShapeError("row cosine needs at least 2 frames");
  const Matrix a = Centered(w1), b = Centered(w2);
  Vector phi(a.rows());
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    phi[j] = a.row(j).dot(b.row(j)) /
             std::max(a.row(j).norm() * b.row(j).norm(), kCosineFloor);
  return phi;
}

Vector PairwiseSoftmax(const Vector &phi) {
  if (!phi.allFinite()) throw ValueError("pairwise softmax: non-finite similarity");
  Vector p(phi.size());
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    const double ex = std::exp(phi[j]);
    p[j] = ex / (std::numbers::e + ex);
  }
  return p;
}

Matrix DecorrelationScores(const Vector &p, int frames) {
  if (frames < 1) throw ValueError("decorrelation scores: frames < 1");
  const Vector s = (1.0 - p.array()).matrix();
  return s.replicate(1, frames);
}

Matrix ChannelDecorrelate(const Matrix &w1, const Matrix &w2) {
  const Vector p = PairwiseSoftmax(RowCosine(w1, w2));
  return w2.cwiseProduct(DecorrelationScores(p, static_cast<int>(w2.cols())));
}

Matrix ChannelCorrelate(const Matrix &w1, const Matrix &w2) {
  const Vector p = PairwiseSoftmax(RowCosine(w1, w2));
  return p.asDiagonal() * w2;
}

Matrix ParallelFuse(std::span<const Matrix> reps, const std::optional<Vector> &emb) {
  if (reps.empty()) throw ShapeError("parallel fuse: empty input list");
  Matrix sum = reps[0];
  for (size_t i = 1; i < reps.size(); ++i) {
    CheckPair(reps[0], reps[i]);
    sum += reps[i];
  }
  if (emb) {
    CheckEmbedding(sum, *emb);
    sum = emb->asDiagonal() * sum;
  }
  return sum;
}

Matrix CdFuse(const Matrix &w1, const Matrix &w2, const std::optional<Vector> &emb) {
  Matrix cd = ChannelDecorrelate(w1, w2);
  if (emb) {
    CheckEmbedding(cd, *emb);
    cd = emb->asDiagonal() * cd;
  }
  return w1 + cd;
}

Matrix CcFuse(const Matrix &w1, const Matrix &w2, const std::optional<Vector> &emb) {
  Matrix cc = ChannelCorrelate(w1, w2);
  if (emb) {
    CheckEmbedding(cc, *emb);
    cc = emb->asDiagonal() * cc;
  }
  return w1 + cc;
}

Matrix IpdFuse(const Matrix &adapted, const Matrix &ipd, const ParameterSet &params,
               const ModelConfig &cfg) {
  ag::Tape tape(false);
  ParamBinder binder(&tape, params, false);
  return IpdFuse(tape.Constant(adapted), tape.Constant(ipd), binder, cfg).value();
}

// ---- tape forms --------------------------------------------------------------

ag::Var RowCosine(ag::Var w1, ag::Var w2) {
  Vector phi = RowCosine(w1.value(), w2.value());
  return w1.tape()->Record(phi, {w1, w2}, [w1, w2](ag::Tape &t, const Matrix &g) {
    const Matrix a = Centered(w1.value()), b = Centered(w2.value());
    Matrix ga(a.rows(), a.cols()), gb(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      const double na = a.row(j).norm(), nb = b.row(j).norm();
      const double dot = a.row(j).dot(b.row(j));
      const bool floored = na * nb <= kCosineFloor;
      const double den = floored ? kCosineFloor : na * nb;
      // d(dot/den)/da = b/den - dot * nb * (a/na) / den^2; the second term
      // vanishes on the floor, where den is constant.
      ga.row(j) = b.row(j) / den;
      gb.row(j) = a.row(j) / den;
      if (!floored) {
        ga.row(j) -= (dot * nb / (den * den * na)) * a.row(j);
        gb.row(j) -= (dot * na / (den * den * nb)) * b.row(j);
      }
      ga.row(j) *= g(j, 0);
      gb.row(j) *= g(j, 0);
    }
    // Back through the per-row mean removal.
    if (w1.requires_grad()) t.Accumulate(w1, Centered(ga));
    if (w2.requires_grad()) t.Accumulate(w2, Centered(gb));
  });
}

ag::Var PairwiseSoftmax(ag::Var phi) {
  Vector p = PairwiseSoftmax(Vector(phi.value().col(0)));
  Vector dp = (p.array() * (1.0 - p.array())).matrix();
  return phi.tape()->Record(p, {phi}, [phi, dp](ag::Tape &t, const Matrix &g) {
    t.Accumulate(phi, g.cwiseProduct(dp));
  });
}

ag::Var ChannelDecorrelate(ag::Var w1, ag::Var w2) {
  ag::Var s = ag::OneMinus(PairwiseSoftmax(RowCosine(w1, w2)));
  return ag::ScaleRows(w2, s);
}

ag::Var ChannelCorrelate(ag::Var w1, ag::Var w2) {
  return ag::ScaleRows(w2, PairwiseSoftmax(RowCosine(w1, w2)));
}

ag::Var ParallelFuse(std::span<const ag::Var> reps, std::optional<ag::Var> emb) {
  if (reps.empty()) throw ShapeError("parallel fuse: empty input list");
  ag::Var sum = reps[0];
  for (size_t i = 1; i < reps.size(); ++i) sum = ag::Add(sum, reps[i]);
  return emb ? ag::ScaleRows(sum, *emb) : sum;
}

ag::Var CdFuse(ag::Var w1, ag::Var w2, std::optional<ag::Var> emb) {
  ag::Var cd = ChannelDecorrelate(w1, w2);
  if (emb) cd = ag::ScaleRows(cd, *emb);
  return ag::Add(w1, cd);
}

ag::Var CcFuse(ag::Var w1, ag::Var w2, std::optional<ag::Var> emb) {
  ag::Var cc = ChannelCorrelate(w1, w2);
  if (emb) cc = ag::ScaleRows(cc, *emb);
  return ag::Add(w1, cc);
}

ag::Var IpdFuse(ag::Var adapted, ag::Var ipd, ParamBinder &p, const ModelConfig &cfg) {
  if (ipd.rows() != cfg.IpdBins())
    throw ShapeError("ipd features have " + std::to_string(ipd.rows()) +
                     " rows, config expects " + std::to_string(cfg.IpdBins()));
  ag::Var branch = ag::Relu(layers::Pointwise(p, "ipd.encoder", ipd));
  branch = ag::UpsampleCols(branch, static_cast<int>(adapted.cols()));
  if (branch.cols() != adapted.cols())
    throw ShapeError("ipd branch misaligned with encoder frames");
  branch = layers::ConvBlock(p, "ipd.block", branch, 1);
  return layers::Pointwise(p, "ipd.fuse", ag::ConcatRows(adapted, branch));
}

}  // namespace cdtse::spatial
