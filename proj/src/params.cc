// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/params.h"

#include <cmath>
#include <random>

namespace cdtse {

namespace {

void AddConvBlock(std::vector<ParameterSpec> *specs, const std::string &prefix,
                  int channels, int hidden, int kernel) {
  specs->push_back({prefix + ".conv_in.weight", hidden, channels});
  specs->push_back({prefix + ".conv_in.bias", hidden, 1});
  specs->push_back({prefix + ".prelu1", 1, 1});
  specs->push_back({prefix + ".norm1.gain", hidden, 1});
  specs->push_back({prefix + ".norm1.bias", hidden, 1});
  specs->push_back({prefix + ".dconv.weight", hidden, kernel});
  specs->push_back({prefix + ".dconv.bias", hidden, 1});
  specs->push_back({prefix + ".prelu2", 1, 1});
  specs->push_back({prefix + ".norm2.gain", hidden, 1});
  specs->push_back({prefix + ".norm2.bias", hidden, 1});
  specs->push_back({prefix + ".conv_out.weight", channels, hidden});
  specs->push_back({prefix + ".conv_out.bias", channels, 1});
}

bool EndsWith(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<ParameterSpec> ParameterSpecs(const ModelConfig &cfg) {
  cfg.Validate();
  std::vector<ParameterSpec> specs;
  specs.push_back({"encoder.0.weight", cfg.N, cfg.L});
  if (UsesSecondEncoder(cfg.spatial_mode)) specs.push_back({"encoder.1.weight", cfg.N, cfg.L});
  if (IsDecorrelationMode(cfg.spatial_mode) && cfg.cd_fusion == CdFusion::kConcat) {
    specs.push_back({"fusion.weight", cfg.N, 2 * cfg.N});
    specs.push_back({"fusion.bias", cfg.N, 1});
  }
  specs.push_back({"aux.encoder.weight", cfg.N, cfg.L});
  AddConvBlock(&specs, "aux.block", cfg.N, cfg.H, cfg.P);

  specs.push_back({"mask.norm.gain", cfg.N, 1});
  specs.push_back({"mask.norm.bias", cfg.N, 1});
  specs.push_back({"mask.bottleneck.weight", cfg.B, cfg.N});
  specs.push_back({"mask.bottleneck.bias", cfg.B, 1});
  for (int r = 0; r < cfg.R; ++r)
    for (int x = 0; x < cfg.X; ++x)
      AddConvBlock(&specs, "mask.block." + std::to_string(r) + "." + std::to_string(x),
                   cfg.B, cfg.H, cfg.P);
  specs.push_back({"mask.output.weight", cfg.N, cfg.B});
  specs.push_back({"mask.output.bias", cfg.N, 1});

  if (cfg.spatial_mode == SpatialMode::kIpd) {
    specs.push_back({"ipd.encoder.weight", cfg.B, cfg.IpdBins()});
    specs.push_back({"ipd.encoder.bias", cfg.B, 1});
    AddConvBlock(&specs, "ipd.block", cfg.B, cfg.H, cfg.P);
    specs.push_back({"ipd.fuse.weight", cfg.B, 2 * cfg.B});
    specs.push_back({"ipd.fuse.bias", cfg.B, 1});
  }

  specs.push_back({"decoder.weight", cfg.L, cfg.N});
  specs.push_back({"classifier.weight", cfg.num_speakers, cfg.N});
  return specs;
}

ParameterSet InitParameters(const ModelConfig &cfg, uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  for (const auto &spec : ParameterSpecs(cfg)) {
    Matrix m = Matrix::Zero(spec.rows, spec.cols);
    const std::string &n = spec.name;
    if (n == "classifier.weight" || EndsWith(n, ".bias")) {
      // zeros
    } else if (EndsWith(n, ".gain")) {
      m.setOnes();
    } else if (EndsWith(n, ".prelu1") || EndsWith(n, ".prelu2")) {
      m.setConstant(0.25);
    } else {
      // decoder.weight is L x N and consumes N inputs per output sample.
      const double fan_in = static_cast<double>(spec.cols);
      std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in),
                                                  1.0 / std::sqrt(fan_in));
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    }
    params.emplace(n, std::move(m));
  }
  RoundToFloat32(&params);
  return params;
}

void CheckParameters(const ParameterSet &params, const ModelConfig &cfg) {
  const auto specs = ParameterSpecs(cfg);
  if (specs.size() != params.size())
    throw ShapeError("parameter set has " + std::to_string(params.size()) +
                     " tensors, config expects " + std::to_string(specs.size()));
  for (const auto &spec : specs) {
    auto it = params.find(spec.name);
    if (it == params.end()) throw ShapeError("missing parameter '" + spec.name + "'");
    if (it->second.rows() != spec.rows || it->second.cols() != spec.cols)
      throw ShapeError("parameter '" + spec.name + "' has wrong shape");
    if (!it->second.allFinite())
      throw ValueError("parameter '" + spec.name + "' is not finite");
  }
}

void RoundToFloat32(ParameterSet *params) {
  for (auto &[name, m] : *params)
    m = m.cast<float>().cast<double>();
}

ParameterSet ZerosLike(const ParameterSet &params) {
  ParameterSet out;
  for (const auto &[name, m] : params) out.emplace(name, Matrix::Zero(m.rows(), m.cols()));
  return out;
}

double SquaredNorm(const ParameterSet &params) {
  double s = 0.0;
  for (const auto &[name, m] : params) s += m.squaredNorm();
  return s;
}

ParamBinder::ParamBinder(ag::Tape *tape, const ParameterSet &params, bool trainable)
    : tape_(tape), params_(params), trainable_(trainable) {}

ag::Var ParamBinder::operator()(const std::string &name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  auto p = params_.find(name);
  if (p == params_.end()) throw ShapeError("unknown parameter '" + name + "'");
  ag::Var v = trainable_ ? tape_->Leaf(p->second) : tape_->Constant(p->second);
  bound_.emplace(name, v);
  return v;
}

void ParamBinder::AccumulateGradients(ParameterSet *grads) const {
  for (const auto &[name, v] : bound_) {
    if (v.grad().size() == 0) continue;
    auto it = grads->find(name);
    if (it == grads->end())
      grads->emplace(name, v.grad());
    else
      it->second += v.grad();
  }
}

}  // namespace cdtse
