// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/autograd.h"

#include <cmath>
#include <vector>

#include "cdtse/metrics.h"

namespace cdtse::ag {

const Matrix &Var::value() const { return tape_->Value(*this); }
const Matrix &Var::grad() const { return tape_->Grad(*this); }
bool Var::requires_grad() const { return tape_->RequiresGrad(*this); }

Var Tape::Constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), record_, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Record(Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  bool needs = false;
  if (record_)
    for (const Var &v : inputs) needs = needs || RequiresGrad(v);
  nodes_.push_back(
      Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix &Tape::GradSlot(Var v) {
  Node &n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::Accumulate(Var v, const Matrix &g) {
  if (!RequiresGrad(v)) return;
  GradSlot(v) += g;
}

void Tape::Backward(Var root) {
  if (!record_) throw Error("backward on a tape that does not record gradients");
  if (Value(root).size() != 1) throw ShapeError("backward root must be a scalar");
  if (!RequiresGrad(root)) return;
  GradSlot(root).setOnes();
  for (int id = root.id(); id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

void CheckSameShape(Var a, Var b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

void CheckColumn(Var v, Eigen::Index rows, const char *op) {
  if (v.cols() != 1 || v.rows() != rows)
    throw ShapeError(std::string(op) + ": expected a " + std::to_string(rows) +
                     "x1 vector, got " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()));
}

}  // namespace

Var Add(Var a, Var b) {
  CheckSameShape(a, b, "add");
  return a.tape()->Record(a.value() + b.value(), {a, b},
                          [a, b](Tape &t, const Matrix &g) {
                            t.Accumulate(a, g);
                            t.Accumulate(b, g);
                          });
}

Var Sub(Var a, Var b) {
  CheckSameShape(a, b, "sub");
  return a.tape()->Record(a.value() - b.value(), {a, b},
                          [a, b](Tape &t, const Matrix &g) {
                            t.Accumulate(a, g);
                            t.Accumulate(b, -g);
                          });
}

Var Mul(Var a, Var b) {
  CheckSameShape(a, b, "mul");
  return a.tape()->Record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape &t, const Matrix &g) {
                            t.Accumulate(a, g.cwiseProduct(b.value()));
                            t.Accumulate(b, g.cwiseProduct(a.value()));
                          });
}

Var Scale(Var a, double s) {
  return a.tape()->Record(a.value() * s, {a},
                          [a, s](Tape &t, const Matrix &g) { t.Accumulate(a, g * s); });
}

Var OneMinus(Var a) {
  Matrix out = (1.0 - a.value().array()).matrix();
  return a.tape()->Record(std::move(out), {a},
                          [a](Tape &t, const Matrix &g) { t.Accumulate(a, -g); });
}

Var MatMul(Var w, Var x) {
  if (w.cols() != x.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(w.cols()) +
                     " vs " + std::to_string(x.rows()));
  Matrix out = w.value() * x.value();
  return w.tape()->Record(std::move(out), {w, x}, [w, x](Tape &t, const Matrix &g) {
    if (w.requires_grad()) t.Accumulate(w, g * x.value().transpose());
    if (x.requires_grad()) t.Accumulate(x, w.value().transpose() * g);
  });
}

Var AddBias(Var x, Var b) {
  CheckColumn(b, x.rows(), "add_bias");
  Matrix out = x.value().colwise() + b.value().col(0);
  return x.tape()->Record(std::move(out), {x, b}, [x, b](Tape &t, const Matrix &g) {
    t.Accumulate(x, g);
    if (b.requires_grad()) t.Accumulate(b, g.rowwise().sum());
  });
}

Var ScaleRows(Var x, Var v) {
  CheckColumn(v, x.rows(), "scale_rows");
  Matrix out = v.value().col(0).asDiagonal() * x.value();
  return x.tape()->Record(std::move(out), {x, v}, [x, v](Tape &t, const Matrix &g) {
    if (x.requires_grad()) t.Accumulate(x, v.value().col(0).asDiagonal() * g);
    if (v.requires_grad())
      t.Accumulate(v, g.cwiseProduct(x.value()).rowwise().sum());
  });
}

Var Relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape()->Record(std::move(out), {x}, [x](Tape &t, const Matrix &g) {
    t.Accumulate(x, (x.value().array() > 0.0).select(g, 0.0));
  });
}

Var Sigmoid(Var x) {
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  Tape *tape = x.tape();
  int id = static_cast<int>(tape->size());
  return tape->Record(std::move(out), {x}, [x, id](Tape &t, const Matrix &g) {
    const Matrix &y = t.Value(Var(&t, id));
    t.Accumulate(x, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var PRelu(Var x, Var slope) {
  CheckColumn(slope, 1, "prelu");
  const double a = slope.value()(0, 0);
  Matrix out = (x.value().array() > 0.0).select(x.value(), a * x.value());
  return x.tape()->Record(std::move(out), {x, slope},
                          [x, slope, a](Tape &t, const Matrix &g) {
                            const auto pos = x.value().array() > 0.0;
                            t.Accumulate(x, pos.select(g, a * g));
                            if (slope.requires_grad()) {
                              Matrix ga(1, 1);
                              ga(0, 0) = pos.select(0.0, g.cwiseProduct(x.value())).sum();
                              t.Accumulate(slope, ga);
                            }
                          });
}

Var GlobalLayerNorm(Var x, Var gain, Var bias, double eps) {
  CheckColumn(gain, x.rows(), "gln gain");
  CheckColumn(bias, x.rows(), "gln bias");
  const Matrix &v = x.value();
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Matrix xhat = ((v.array() - mean) * inv_std).matrix();
  Matrix out = (gain.value().col(0).asDiagonal() * xhat).colwise() + bias.value().col(0);
  return x.tape()->Record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, inv_std, xhat = std::move(xhat)](Tape &t, const Matrix &g) {
        if (gain.requires_grad())
          t.Accumulate(gain, g.cwiseProduct(xhat).rowwise().sum());
        if (bias.requires_grad()) t.Accumulate(bias, g.rowwise().sum());
        if (x.requires_grad()) {
          Matrix dxhat = gain.value().col(0).asDiagonal() * g;
          const double m1 = dxhat.mean();
          const double m2 = dxhat.cwiseProduct(xhat).mean();
          t.Accumulate(x, (inv_std * (dxhat.array() - m1 - xhat.array() * m2)).matrix());
        }
      });
}

Var DepthwiseConv(Var x, Var kernel, Var bias, int dilation) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  const Eigen::Index width = kernel.cols();
  if (kernel.rows() != rows) throw ShapeError("depthwise: kernel rows != channels");
  if (width % 2 == 0) throw ShapeError("depthwise: kernel width must be odd");
  CheckColumn(bias, rows, "depthwise bias");
  const Eigen::Index center = (width - 1) / 2;

  // Valid output column range for tap p: [begin, end), reading x at t + shift.
  struct TapRange {
    Eigen::Index begin, len, shift;
  };
  std::vector<TapRange> taps(width);
  for (Eigen::Index p = 0; p < width; ++p) {
    Eigen::Index shift = (p - center) * dilation;
    Eigen::Index begin = std::max<Eigen::Index>(0, -shift);
    Eigen::Index end = std::min<Eigen::Index>(cols, cols - shift);
    taps[p] = {begin, std::max<Eigen::Index>(0, end - begin), shift};
  }

  Matrix out = Matrix::Zero(rows, cols);
  out.colwise() += bias.value().col(0);
  const Matrix &k = kernel.value();
  const Matrix &in = x.value();
  for (Eigen::Index p = 0; p < width; ++p) {
    const auto &tr = taps[p];
    if (tr.len == 0) continue;
    out.middleCols(tr.begin, tr.len).noalias() +=
        k.col(p).asDiagonal() * in.middleCols(tr.begin + tr.shift, tr.len);
  }
  return x.tape()->Record(
      std::move(out), {x, kernel, bias},
      [x, kernel, bias, taps = std::move(taps)](Tape &t, const Matrix &g) {
        const Matrix &kv = kernel.value();
        const Matrix &xv = x.value();
        if (bias.requires_grad()) t.Accumulate(bias, g.rowwise().sum());
        if (kernel.requires_grad()) {
          Matrix gk = Matrix::Zero(kv.rows(), kv.cols());
          for (size_t p = 0; p < taps.size(); ++p) {
            const auto &tr = taps[p];
            if (tr.len == 0) continue;
            gk.col(p) = g.middleCols(tr.begin, tr.len)
                            .cwiseProduct(xv.middleCols(tr.begin + tr.shift, tr.len))
                            .rowwise()
                            .sum();
          }
          t.Accumulate(kernel, gk);
        }
        if (x.requires_grad()) {
          Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
          for (size_t p = 0; p < taps.size(); ++p) {
            const auto &tr = taps[p];
            if (tr.len == 0) continue;
            gx.middleCols(tr.begin + tr.shift, tr.len).noalias() +=
                kv.col(p).asDiagonal() * g.middleCols(tr.begin, tr.len);
          }
          t.Accumulate(x, gx);
        }
      });
}

Var Frames(Var signal, int frame_length, int hop) {
  if (signal.rows() != 1) throw ShapeError("frames: expected a 1 x S signal");
  const Eigen::Index s = signal.cols();
  if (s < frame_length) throw ShapeError("frames: signal shorter than frame");
  const Eigen::Index frames = (s - frame_length) / hop + 1;
  Matrix out(frame_length, frames);
  const Matrix &v = signal.value();
  for (Eigen::Index t = 0; t < frames; ++t)
    out.col(t) = v.row(0).segment(t * hop, frame_length).transpose();
  return signal.tape()->Record(
      std::move(out), {signal}, [signal, frame_length, hop](Tape &t, const Matrix &g) {
        Matrix gs = Matrix::Zero(1, signal.cols());
        for (Eigen::Index f = 0; f < g.cols(); ++f)
          gs.row(0).segment(f * hop, frame_length) += g.col(f).transpose();
        t.Accumulate(signal, gs);
      });
}

Var OverlapAdd(Var frames, int hop) {
  const Eigen::Index len = frames.rows(), count = frames.cols();
  Matrix out = Matrix::Zero(1, (count - 1) * hop + len);
  const Matrix &f = frames.value();
  for (Eigen::Index t = 0; t < count; ++t)
    out.row(0).segment(t * hop, len) += f.col(t).transpose();
  return frames.tape()->Record(std::move(out), {frames},
                               [frames, hop, len, count](Tape &t, const Matrix &g) {
                                 Matrix gf(len, count);
                                 for (Eigen::Index i = 0; i < count; ++i)
                                   gf.col(i) = g.row(0).segment(i * hop, len).transpose();
                                 t.Accumulate(frames, gf);
                               });
}

Var FitLength(Var signal, int length) {
  if (signal.rows() != 1) throw ShapeError("fit_length: expected a 1 x S signal");
  const Eigen::Index keep = std::min<Eigen::Index>(signal.cols(), length);
  Matrix out = Matrix::Zero(1, length);
  out.leftCols(keep) = signal.value().leftCols(keep);
  return signal.tape()->Record(std::move(out), {signal},
                               [signal, keep](Tape &t, const Matrix &g) {
                                 Matrix gs = Matrix::Zero(1, signal.cols());
                                 gs.leftCols(keep) = g.leftCols(keep);
                                 t.Accumulate(signal, gs);
                               });
}

Var MeanCols(Var x) {
  Matrix out = x.value().rowwise().mean();
  const double inv = 1.0 / static_cast<double>(x.cols());
  return x.tape()->Record(std::move(out), {x}, [x, inv](Tape &t, const Matrix &g) {
    Matrix gx = (g.col(0) * inv).replicate(1, x.cols());
    t.Accumulate(x, gx);
  });
}

Var ConcatRows(Var a, Var b) {
  if (a.cols() != b.cols()) throw ShapeError("concat_rows: column mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const Eigen::Index ra = a.rows(), rb = b.rows();
  return a.tape()->Record(std::move(out), {a, b}, [a, b, ra, rb](Tape &t, const Matrix &g) {
    if (a.requires_grad()) t.Accumulate(a, g.topRows(ra));
    if (b.requires_grad()) t.Accumulate(b, g.bottomRows(rb));
  });
}

Var UpsampleCols(Var x, int target_cols) {
  if (target_cols < 1) throw ValueError("upsample: target_frames < 1");
  const Eigen::Index src = x.cols();
  if (src < 1) throw ShapeError("upsample: input has no frames");
  Matrix out(x.rows(), target_cols);
  for (Eigen::Index j = 0; j < target_cols; ++j)
    out.col(j) = x.value().col(j * src / target_cols);
  return x.tape()->Record(std::move(out), {x}, [x, src](Tape &t, const Matrix &g) {
    Matrix gx = Matrix::Zero(x.rows(), src);
    for (Eigen::Index j = 0; j < g.cols(); ++j) gx.col(j * src / g.cols()) += g.col(j);
    t.Accumulate(x, gx);
  });
}

Var SiSdr(std::span<const double> reference, Var estimate) {
  if (estimate.rows() != 1) throw ShapeError("sisdr: estimate must be 1 x S");
  const Matrix &est = estimate.value();
  std::vector<double> grad;
  Matrix out(1, 1);
  out(0, 0) = metrics::SiSdrWithGradient(
      reference, std::span<const double>(est.data(), est.size()), &grad);
  return estimate.tape()->Record(
      std::move(out), {estimate}, [estimate, grad = std::move(grad)](Tape &t, const Matrix &g) {
        Matrix ge = Eigen::Map<const Matrix>(grad.data(), 1,
                                             static_cast<Eigen::Index>(grad.size())) *
                    g(0, 0);
        t.Accumulate(estimate, ge);
      });
}

Var SoftmaxCrossEntropy(Var logits, int label) {
  if (logits.cols() != 1) throw ShapeError("cross entropy: logits must be K x 1");
  if (label < 0 || label >= logits.rows())
    throw ValueError("cross entropy: label " + std::to_string(label) +
                     " outside [0, " + std::to_string(logits.rows()) + ")");
  const Vector z = logits.value().col(0);
  const double zmax = z.maxCoeff();
  const Vector ez = (z.array() - zmax).exp().matrix();
  const double sum = ez.sum();
  Vector prob = ez / sum;
  Matrix out(1, 1);
  out(0, 0) = std::log(sum) + zmax - z[label];
  return logits.tape()->Record(std::move(out), {logits},
                               [logits, label, prob = std::move(prob)](Tape &t, const Matrix &g) {
                                 Matrix gl = prob;
                                 gl(label, 0) -= 1.0;
                                 t.Accumulate(logits, gl * g(0, 0));
                               });
}

}  // namespace cdtse::ag
