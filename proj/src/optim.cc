// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/optim.h"

#include <cmath>

namespace cdtse::optim {

double ClipGradNorm(ParameterSet *grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ValueError("gradient clip norm must be positive");
  const double norm = std::sqrt(SquaredNorm(*grads));
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto &[name, g] : *grads) g *= scale;
  }
  return norm;
}

Adam::Adam(const ParameterSet &params, Options opts)
    : opts_(opts), m_(ZerosLike(params)), v_(ZerosLike(params)) {}

void Adam::Step(ParameterSet *params, const ParameterSet &grads, double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  for (auto &[name, p] : *params) {
    const Matrix &g = grads.at(name);
    Matrix &m = m_.at(name);
    Matrix &v = v_.at(name);
    m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
    v = opts_.beta2 * v + (1.0 - opts_.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts_.eps);
  }
  RoundToFloat32(params);
}

void Adam::Restore(int64_t step, ParameterSet m, ParameterSet v) {
  for (const auto &[name, ref] : m_) {
    auto im = m.find(name), iv = v.find(name);
    if (im == m.end() || iv == v.end() || im->second.rows() != ref.rows() ||
        im->second.cols() != ref.cols() || iv->second.rows() != ref.rows() ||
        iv->second.cols() != ref.cols())
      throw ShapeError("optimizer state does not match parameter " + name);
  }
  if (m.size() != m_.size() || v.size() != v_.size())
    throw ShapeError("optimizer state holds unexpected tensors");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace cdtse::optim
