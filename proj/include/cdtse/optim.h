// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_OPTIM_H_
#define CDTSE_OPTIM_H_

#include <cstdint>

#include "cdtse/params.h"

namespace cdtse::optim {

// Scales `grads` in place so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double ClipGradNorm(ParameterSet *grads, double max_norm);

class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(const ParameterSet &params) : Adam(params, Options()) {}
  Adam(const ParameterSet &params, Options opts);

  // One bias-corrected update at learning rate `lr`; parameters are then
  // rounded to float32 precision.
  void Step(ParameterSet *params, const ParameterSet &grads, double lr);

  int64_t step() const { return step_; }
  const ParameterSet &m() const { return m_; }
  const ParameterSet &v() const { return v_; }
  void Restore(int64_t step, ParameterSet m, ParameterSet v);

 private:
  Options opts_;
  int64_t step_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

}  // namespace cdtse::optim

#endif  // CDTSE_OPTIM_H_
