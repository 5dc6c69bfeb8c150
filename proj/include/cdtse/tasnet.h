// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_TASNET_H_
#define CDTSE_TASNET_H_

#include <optional>

#include "cdtse/model_config.h"
#include "cdtse/params.h"
#include "cdtse/signal.h"

namespace cdtse::tasnet {

// Graph nodes produced by one forward pass.
struct ForwardResult {
  ag::Var estimate;   // 1 x S, same length as the mixture
  ag::Var embedding;  // N x 1
  ag::Var w1;         // N x T reference-channel encoding
  std::optional<ag::Var> w2;
  std::optional<ag::Var> wcd;  // decorrelated (or correlated) W2, before adaptation
  ag::Var fused;      // representation fed to the mask estimator
  ag::Var mask;       // N x T
};

// Checks mode/channel/sample-rate compatibility; throws ShapeError or
// ValueError with a message naming the mismatch.
void CheckInputs(const MultichannelMixture &mix, const Waveform &enrollment,
                 const ModelConfig &cfg);

ForwardResult Forward(ParamBinder &params, const ModelConfig &cfg,
                      const MultichannelMixture &mix, const Waveform &enrollment);

// Tape pieces shared by Forward and the plain wrappers below.
ag::Var SpeakerEmbedGraph(ParamBinder &params, const ModelConfig &cfg, ag::Var enrollment);
ag::Var EstimateMaskGraph(ParamBinder &params, const ModelConfig &cfg, ag::Var rep,
                          ag::Var emb, std::optional<ag::Var> ipd);
ag::Var DecodeGraph(ParamBinder &params, const ModelConfig &cfg, ag::Var rep);

// ---- plain wrappers (inference, no gradients) ------------------------------------

// Encoder of the given channel: N x T with T = (S - L) / (L/2) + 1.
Matrix Encode(const Waveform &wave, const ParameterSet &params, const ModelConfig &cfg,
              int channel = 0);
// Transposed convolution; output length (T - 1) * L/2 + L.
Waveform Decode(const Matrix &rep, const ParameterSet &params, const ModelConfig &cfg);
Vector SpeakerEmbed(const Waveform &enrollment, const ParameterSet &params,
                    const ModelConfig &cfg);
// out[j, t] = rep[j, t] * emb[j]
Matrix Adapt(const Matrix &rep, const Vector &emb);
// ipd (IpdBins x Tf) is required in ipd mode and ignored otherwise.
Matrix EstimateMask(const Matrix &rep, const Vector &emb, const ParameterSet &params,
                    const ModelConfig &cfg, const Matrix *ipd = nullptr);
Waveform Extract(const MultichannelMixture &mix, const Waveform &enrollment,
                 const ParameterSet &params, const ModelConfig &cfg);

}  // namespace cdtse::tasnet

#endif  // CDTSE_TASNET_H_
