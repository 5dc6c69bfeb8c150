// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_PARAMS_H_
#define CDTSE_PARAMS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cdtse/autograd.h"
#include "cdtse/model_config.h"

namespace cdtse {

// Named parameter tensors, ordered by name.
using ParameterSet = std::map<std::string, Matrix>;

struct ParameterSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

// The closed set of parameter names and shapes implied by `cfg`.
std::vector<ParameterSpec> ParameterSpecs(const ModelConfig &cfg);

// Fan-in scaled uniform weights, zero biases, unit norm gains, PReLU slope
// 0.25, zero classifier. Values are rounded to float32 precision.
ParameterSet InitParameters(const ModelConfig &cfg, uint64_t seed);

// Throws ShapeError unless `params` holds exactly the specs of `cfg`.
void CheckParameters(const ParameterSet &params, const ModelConfig &cfg);

// Rounds every entry to the nearest float32 so checkpoints store it exactly.
void RoundToFloat32(ParameterSet *params);

ParameterSet ZerosLike(const ParameterSet &params);
double SquaredNorm(const ParameterSet &params);

// Exposes parameters to a tape. In trainable mode each parameter becomes a
// leaf whose gradient can be collected after Tape::Backward.
class ParamBinder {
 public:
  ParamBinder(ag::Tape *tape, const ParameterSet &params, bool trainable);

  ag::Var operator()(const std::string &name);
  ag::Tape &tape() { return *tape_; }

  // Adds the gradient of every bound parameter into `grads`.
  void AccumulateGradients(ParameterSet *grads) const;

 private:
  ag::Tape *tape_;
  const ParameterSet &params_;
  bool trainable_;
  std::map<std::string, ag::Var> bound_;
};

}  // namespace cdtse

#endif  // CDTSE_PARAMS_H_
