// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/layers.h"

namespace cdtse::layers {

ag::Var Pointwise(ParamBinder &p, const std::string &prefix, ag::Var x) {
  return ag::AddBias(ag::MatMul(p(prefix + ".weight"), x), p(prefix + ".bias"));
}

ag::Var ConvBlock(ParamBinder &p, const std::string &prefix, ag::Var x, int dilation) {
  ag::Var y = Pointwise(p, prefix + ".conv_in", x);
  y = ag::PRelu(y, p(prefix + ".prelu1"));
  y = ag::GlobalLayerNorm(y, p(prefix + ".norm1.gain"), p(prefix + ".norm1.bias"));
  y = ag::DepthwiseConv(y, p(prefix + ".dconv.weight"), p(prefix + ".dconv.bias"),
                        dilation);
  y = ag::PRelu(y, p(prefix + ".prelu2"));
  y = ag::GlobalLayerNorm(y, p(prefix + ".norm2.gain"), p(prefix + ".norm2.bias"));
  y = Pointwise(p, prefix + ".conv_out", y);
  return ag::Add(x, y);
}

ag::Var WaveEncoder(ParamBinder &p, const std::string &weight_name, ag::Var wave,
                    int frame_length) {
  ag::Var frames = ag::Frames(wave, frame_length, frame_length / 2);
  return ag::Relu(ag::MatMul(p(weight_name), frames));
}

}  // namespace cdtse::layers
