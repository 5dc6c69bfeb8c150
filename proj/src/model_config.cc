// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/model_config.h"

#include <utility>

#include "cdtse/common.h"

namespace cdtse {

namespace {

const std::vector<std::pair<SpatialMode, std::string>> &ModeNames() {
  static const std::vector<std::pair<SpatialMode, std::string>> names = {
      {SpatialMode::kSingle, "single"},   {SpatialMode::kParallel, "parallel"},
      {SpatialMode::kParallelAdapt, "parallel+adapt"},
      {SpatialMode::kCd, "cd"},           {SpatialMode::kCdAdapt, "cd+adapt"},
      {SpatialMode::kCcAdapt, "cc+adapt"}, {SpatialMode::kIpd, "ipd"},
  };
  return names;
}

}  // namespace

SpatialMode ParseSpatialMode(const std::string &name) {
  for (const auto &[mode, n] : ModeNames())
    if (n == name) return mode;
  throw ValueError("invalid spatial mode '" + name + "'; valid modes: {" +
                   SpatialModeList() + "}");
}

std::string SpatialModeName(SpatialMode mode) {
  for (const auto &[m, n] : ModeNames())
    if (m == mode) return n;
  return "?";
}

std::string SpatialModeList() {
  std::string out;
  for (const auto &[m, n] : ModeNames()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

const std::vector<SpatialMode> &AllSpatialModes() {
  static const std::vector<SpatialMode> modes = [] {
    std::vector<SpatialMode> m;
    for (const auto &[mode, n] : ModeNames()) m.push_back(mode);
    return m;
  }();
  return modes;
}

int RequiredChannels(SpatialMode mode) { return mode == SpatialMode::kSingle ? 1 : 2; }

bool UsesSecondEncoder(SpatialMode mode) {
  return mode != SpatialMode::kSingle && mode != SpatialMode::kIpd;
}

bool IsDecorrelationMode(SpatialMode mode) {
  return mode == SpatialMode::kCd || mode == SpatialMode::kCdAdapt ||
         mode == SpatialMode::kCcAdapt;
}

void ModelConfig::Validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw ValueError("model config: " + what);
  };
  require(N >= 1 && B >= 1 && H >= 1 && X >= 1 && R >= 1, "all dims must be >= 1");
  require(L >= 2 && L % 2 == 0, "L must be even and >= 2 (hop is L/2)");
  require(P >= 1 && P % 2 == 1, "P must be odd");
  require(adaptation_after_block == 1, "adaptation_after_block is fixed to 1");
  require(B == N, "B must equal N (the speaker embedding scales bottleneck rows)");
  require(num_speakers >= 1, "num_speakers must be >= 1");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(sample_rate > 0, "sample_rate must be > 0");
  require(ipd_hop >= 1 && ipd_window >= ipd_hop, "ipd window/hop invalid");
}

ModelConfig ModelConfig::Default() { return ModelConfig{}; }

ModelConfig ModelConfig::Toy() {
  ModelConfig c;
  c.N = 64;
  c.B = 64;
  c.H = 128;
  c.X = 4;
  c.R = 1;
  return c;
}

ModelConfig ModelConfig::Micro() {
  ModelConfig c;
  c.N = 8;
  c.B = 8;
  c.H = 8;
  c.L = 4;
  c.X = 2;
  c.R = 1;
  c.num_speakers = 3;
  c.ipd_window = 16;
  c.ipd_hop = 8;
  return c;
}

ModelConfig ModelConfig::Preset(const std::string &name) {
  if (name == "default") return Default();
  if (name == "toy") return Toy();
  if (name == "micro") return Micro();
  throw ValueError("unknown preset '" + name + "' (default, toy, micro)");
}

nlohmann::json ToJson(const ModelConfig &c) {
  return nlohmann::json{
      {"N", c.N},
      {"L", c.L},
      {"B", c.B},
      {"H", c.H},
      {"P", c.P},
      {"X", c.X},
      {"R", c.R},
      {"adaptation_after_block", c.adaptation_after_block},
      {"spatial_mode", SpatialModeName(c.spatial_mode)},
      {"num_speakers", c.num_speakers},
      {"alpha", c.alpha},
      {"sample_rate", c.sample_rate},
      {"ipd_window", c.ipd_window},
      {"ipd_hop", c.ipd_hop},
      {"ipd_include_sin", c.ipd_include_sin},
      {"cd_fusion", c.cd_fusion == CdFusion::kSum ? "sum" : "concat"},
  };
}

ModelConfig ModelConfigFromJson(const nlohmann::json &j) {
  ModelConfig c;
  try {
    c.N = j.at("N");
    c.L = j.at("L");
    c.B = j.at("B");
    c.H = j.at("H");
    c.P = j.at("P");
    c.X = j.at("X");
    c.R = j.at("R");
    c.adaptation_after_block = j.at("adaptation_after_block");
    c.spatial_mode = ParseSpatialMode(j.at("spatial_mode"));
    c.num_speakers = j.at("num_speakers");
    c.alpha = j.at("alpha");
    c.sample_rate = j.at("sample_rate");
    c.ipd_window = j.at("ipd_window");
    c.ipd_hop = j.at("ipd_hop");
    c.ipd_include_sin = j.at("ipd_include_sin");
    std::string fusion = j.at("cd_fusion");
    if (fusion != "sum" && fusion != "concat")
      throw ValueError("cd_fusion must be sum or concat");
    c.cd_fusion = fusion == "sum" ? CdFusion::kSum : CdFusion::kConcat;
  } catch (const nlohmann::json::exception &e) {
    throw ValueError(std::string("model config json: ") + e.what());
  }
  c.Validate();
  return c;
}

}  // namespace cdtse
