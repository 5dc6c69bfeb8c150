// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_LAYERS_H_
#define CDTSE_LAYERS_H_

#include <string>

#include "cdtse/params.h"

namespace cdtse::layers {

// 1x1 convolution: weight * x + bias, parameters "<prefix>.weight/.bias".
ag::Var Pointwise(ParamBinder &p, const std::string &prefix, ag::Var x);

// Residual TCN block: 1x1 -> PReLU -> gLN -> dilated depthwise conv ->
// PReLU -> gLN -> 1x1, added back onto the input.
ag::Var ConvBlock(ParamBinder &p, const std::string &prefix, ag::Var x, int dilation);

// 1 x S waveform -> N x T, ReLU(weight * frames) with stride L/2.
ag::Var WaveEncoder(ParamBinder &p, const std::string &weight_name, ag::Var wave,
                    int frame_length);

}  // namespace cdtse::layers

#endif  // CDTSE_LAYERS_H_
