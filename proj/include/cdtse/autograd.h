// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_AUTOGRAD_H_
#define CDTSE_AUTOGRAD_H_

#include <deque>
#include <functional>
#include <span>

#include "cdtse/common.h"

// A small reverse-mode tape over dense float64 matrices. Every op records its
// output value and, when any input requires a gradient, a closure that
// accumulates the output gradient into its inputs.
namespace cdtse::ag {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape *tape, int id) : tape_(tape), id_(id) {}

  const Matrix &value() const;
  // Zero-sized until backward reaches this node.
  const Matrix &grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

  Tape *tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape *tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // With record_gradients = false no closures are stored (inference).
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var Constant(Matrix value);
  Var Leaf(Matrix value);

  using BackwardFn = std::function<void(Tape &, const Matrix &out_grad)>;
  // `backward` runs only if some input requires a gradient.
  Var Record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void Backward(Var root);

  // Adds `g` into the gradient slot of `v` if it requires one.
  void Accumulate(Var v, const Matrix &g);
  template <typename Expr>
  void Accumulate(Var v, const Eigen::MatrixBase<Expr> &g) {
    if (!RequiresGrad(v)) return;
    Matrix &slot = GradSlot(v);
    slot += g;
  }

  const Matrix &Value(Var v) const { return nodes_[v.id()].value; }
  const Matrix &Grad(Var v) const { return nodes_[v.id()].grad; }
  bool RequiresGrad(Var v) const { return nodes_[v.id()].requires_grad; }
  bool recording() const { return record_; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  Matrix &GradSlot(Var v);

  bool record_;
  std::deque<Node> nodes_;
};

// ---- elementwise / linear ---------------------------------------------------

Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double s);
// 1 - a
Var OneMinus(Var a);
// W * X
Var MatMul(Var w, Var x);
// x + b broadcast over columns; b is rows x 1.
Var AddBias(Var x, Var b);
// out[j, t] = x[j, t] * v[j]; v is rows x 1.
Var ScaleRows(Var x, Var v);

Var Relu(Var x);
Var Sigmoid(Var x);
// Single learnable slope (1x1) for negative inputs.
Var PRelu(Var x, Var slope);

// Normalizes over all entries, then per-row gain and bias (rows x 1).
Var GlobalLayerNorm(Var x, Var gain, Var bias, double eps = 1e-8);

// Per-row dilated convolution with odd kernel width, zero "same" padding.
// kernel is rows x P, bias rows x 1.
Var DepthwiseConv(Var x, Var kernel, Var bias, int dilation);

// ---- shape ------------------------------------------------------------------

// 1 x S signal -> frame_length x T frames with stride hop.
Var Frames(Var signal, int frame_length, int hop);
// frame_length x T -> 1 x ((T-1)*hop + frame_length), overlap-add.
Var OverlapAdd(Var frames, int hop);
// Truncate or zero-pad the columns of a 1 x S' row to `length`.
Var FitLength(Var signal, int length);
Var MeanCols(Var x);
Var ConcatRows(Var a, Var b);
// Nearest-neighbour column repetition, matching UpsampleFrames.
Var UpsampleCols(Var x, int target_cols);

// ---- losses -----------------------------------------------------------------

// Unclamped SiSDR(reference, estimate) as a 1x1 value; estimate is 1 x S.
Var SiSdr(std::span<const double> reference, Var estimate);
// -log softmax(logits)[label]; logits is K x 1.
Var SoftmaxCrossEntropy(Var logits, int label);

}  // namespace cdtse::ag

#endif  // CDTSE_AUTOGRAD_H_
