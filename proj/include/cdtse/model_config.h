// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_MODEL_CONFIG_H_
#define CDTSE_MODEL_CONFIG_H_

#include <string>
#include <vector>

#include "json.hpp"

namespace cdtse {

// How the two microphone channels are combined before mask estimation.
enum class SpatialMode {
  kSingle,         // reference channel only
  kParallel,       // W1 + W2
  kParallelAdapt,  // adapt(W1 + W2, e)
  kCd,             // W1 + Wcd
  kCdAdapt,        // W1 + adapt(Wcd, e)
  kCcAdapt,        // W1 + adapt(Wcc, e)
  kIpd,            // reference channel + IPD branch inside the mask estimator
};

SpatialMode ParseSpatialMode(const std::string &name);
std::string SpatialModeName(SpatialMode mode);
// "single, parallel, parallel+adapt, cd, cd+adapt, cc+adapt, ipd"
std::string SpatialModeList();
const std::vector<SpatialMode> &AllSpatialModes();

// Number of microphone channels a mode consumes.
int RequiredChannels(SpatialMode mode);
bool UsesSecondEncoder(SpatialMode mode);
bool IsDecorrelationMode(SpatialMode mode);

enum class CdFusion { kSum, kConcat };

struct ModelConfig {
  int N = 256;  // encoder filters
  int L = 20;   // encoder window (samples); hop is L / 2
  int B = 256;  // bottleneck channels
  int H = 512;  // conv-block hidden channels
  int P = 3;    // depthwise kernel width
  int X = 8;    // blocks per repeat
  int R = 4;    // repeats
  // Fixed: adaptation sits between the first and second conv blocks.
  int adaptation_after_block = 1;
  SpatialMode spatial_mode = SpatialMode::kCdAdapt;
  int num_speakers = 8;
  double alpha = 0.5;
  int sample_rate = 8000;
  // IPD branch (ipd mode only).
  int ipd_window = 256;
  int ipd_hop = 128;
  bool ipd_include_sin = false;
  // How W1 and the (adapted) decorrelated W2 are joined in cd modes.
  CdFusion cd_fusion = CdFusion::kSum;

  int Hop() const { return L / 2; }
  int IpdBins() const { return (ipd_window / 2 + 1) * (ipd_include_sin ? 2 : 1); }

  // Throws ValueError describing the first violated invariant.
  void Validate() const;

  static ModelConfig Default();
  static ModelConfig Toy();
  // Smallest config used by gradient checks (N=8, X=2, R=1).
  static ModelConfig Micro();
  static ModelConfig Preset(const std::string &name);
};

nlohmann::json ToJson(const ModelConfig &cfg);
ModelConfig ModelConfigFromJson(const nlohmann::json &j);

}  // namespace cdtse

#endif  // CDTSE_MODEL_CONFIG_H_
