// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/tasnet.h"

#include <vector>

#include "cdtse/layers.h"
#include "cdtse/spatial.h"

namespace cdtse::tasnet {

namespace {

Matrix AsRow(const Waveform &w) {
  return Eigen::Map<const Matrix>(w.samples.data(), 1,
                                  static_cast<Eigen::Index>(w.samples.size()));
}

Waveform FromRow(const Matrix &row, int sample_rate) {
  return Waveform(std::vector<double>(row.data(), row.data() + row.size()), sample_rate);
}

void CheckLength(size_t samples, const ModelConfig &cfg, const char *what) {
  if (samples < static_cast<size_t>(cfg.L))
    throw ShapeError(std::string(what) + " has " + std::to_string(samples) +
                     " samples, shorter than the encoder window L=" +
                     std::to_string(cfg.L));
}

ag::Var EncodeChannel(ParamBinder &p, const ModelConfig &cfg, const Waveform &wave,
                      int channel) {
  CheckLength(wave.size(), cfg, "input");
  return layers::WaveEncoder(p, "encoder." + std::to_string(channel) + ".weight",
                             p.tape().Constant(AsRow(wave)), cfg.L);
}

ag::Var JoinDecorrelated(ParamBinder &p, const ModelConfig &cfg, ag::Var w1, ag::Var aux) {
  if (cfg.cd_fusion == CdFusion::kConcat)
    return layers::Pointwise(p, "fusion", ag::ConcatRows(w1, aux));
  return ag::Add(w1, aux);
}

}  // namespace

void CheckInputs(const MultichannelMixture &mix, const Waveform &enrollment,
                 const ModelConfig &cfg) {
  const int need = RequiredChannels(cfg.spatial_mode);
  const int have = static_cast<int>(mix.NumChannels());
  if (need == 1 ? have < 1 : have != need)
    throw ShapeError("spatial mode " + SpatialModeName(cfg.spatial_mode) + " needs " +
                     std::to_string(need) + " channel(s), mixture has " +
                     std::to_string(have));
  if (mix.SampleRate() != cfg.sample_rate || enrollment.sample_rate != cfg.sample_rate)
    throw ValueError("sample rate mismatch: model expects " +
                     std::to_string(cfg.sample_rate) + " Hz (resample inputs first)");
  for (const auto &ch : mix.Channels()) CheckFinite(ch.view(), "mixture");
  CheckFinite(enrollment.view(), "enrollment");
  CheckLength(mix.NumSamples(), cfg, "mixture");
  CheckLength(enrollment.size(), cfg, "enrollment");
}

ag::Var SpeakerEmbedGraph(ParamBinder &p, const ModelConfig &cfg, ag::Var enrollment) {
  ag::Var rep = layers::WaveEncoder(p, "aux.encoder.weight", enrollment, cfg.L);
  rep = layers::ConvBlock(p, "aux.block", rep, 1);
  return ag::MeanCols(rep);
}

ag::Var EstimateMaskGraph(ParamBinder &p, const ModelConfig &cfg, ag::Var rep,
                          ag::Var emb, std::optional<ag::Var> ipd) {
  if (rep.rows() != cfg.N)
    throw ShapeError("mask estimator: representation has " + std::to_string(rep.rows()) +
                     " rows, expected N=" + std::to_string(cfg.N));
  if (emb.rows() != cfg.N || emb.cols() != 1)
    throw ShapeError("mask estimator: embedding must be N x 1");
  if (cfg.spatial_mode == SpatialMode::kIpd && !ipd)
    throw ValueError("mask estimator: ipd mode needs IPD features");

  ag::Var x = ag::GlobalLayerNorm(rep, p("mask.norm.gain"), p("mask.norm.bias"));
  x = layers::Pointwise(p, "mask.bottleneck", x);
  for (int r = 0; r < cfg.R; ++r) {
    for (int b = 0; b < cfg.X; ++b) {
      x = layers::ConvBlock(
          p, "mask.block." + std::to_string(r) + "." + std::to_string(b), x, 1 << b);
      if (r == 0 && b + 1 == cfg.adaptation_after_block) {
        x = ag::ScaleRows(x, emb);
        if (cfg.spatial_mode == SpatialMode::kIpd) x = spatial::IpdFuse(x, *ipd, p, cfg);
      }
    }
  }
  return ag::Sigmoid(layers::Pointwise(p, "mask.output", x));
}

ag::Var DecodeGraph(ParamBinder &p, const ModelConfig &cfg, ag::Var rep) {
  if (rep.rows() != cfg.N)
    throw ShapeError("decoder: representation has " + std::to_string(rep.rows()) +
                     " rows, expected N=" + std::to_string(cfg.N));
  return ag::OverlapAdd(ag::MatMul(p("decoder.weight"), rep), cfg.Hop());
}

ForwardResult Forward(ParamBinder &p, const ModelConfig &cfg,
                      const MultichannelMixture &mix, const Waveform &enrollment) {
  CheckInputs(mix, enrollment, cfg);
  ag::Tape &tape = p.tape();
  ForwardResult out;
  out.embedding = SpeakerEmbedGraph(p, cfg, tape.Constant(AsRow(enrollment)));
  out.w1 = EncodeChannel(p, cfg, mix.Channel(0), 0);
  if (UsesSecondEncoder(cfg.spatial_mode)) out.w2 = EncodeChannel(p, cfg, mix.Channel(1), 1);

  switch (cfg.spatial_mode) {
    case SpatialMode::kSingle:
    case SpatialMode::kIpd:
      out.fused = out.w1;
      break;
    case SpatialMode::kParallel:
    case SpatialMode::kParallelAdapt: {
      const ag::Var reps[] = {out.w1, *out.w2};
      std::optional<ag::Var> emb;
      if (cfg.spatial_mode == SpatialMode::kParallelAdapt) emb = out.embedding;
      out.fused = spatial::ParallelFuse(reps, emb);
      break;
    }
    case SpatialMode::kCd:
      out.wcd = spatial::ChannelDecorrelate(out.w1, *out.w2);
      out.fused = JoinDecorrelated(p, cfg, out.w1, *out.wcd);
      break;
    case SpatialMode::kCdAdapt:
      out.wcd = spatial::ChannelDecorrelate(out.w1, *out.w2);
      out.fused = JoinDecorrelated(p, cfg, out.w1, ag::ScaleRows(*out.wcd, out.embedding));
      break;
    case SpatialMode::kCcAdapt:
      out.wcd = spatial::ChannelCorrelate(out.w1, *out.w2);
      out.fused = JoinDecorrelated(p, cfg, out.w1, ag::ScaleRows(*out.wcd, out.embedding));
      break;
  }

  std::optional<ag::Var> ipd;
  if (cfg.spatial_mode == SpatialMode::kIpd) {
    IpdOptions opts{cfg.ipd_window, cfg.ipd_hop, cfg.ipd_include_sin};
    ipd = tape.Constant(IpdFeatures(mix, opts));
  }
  out.mask = EstimateMaskGraph(p, cfg, out.fused, out.embedding, ipd);
  ag::Var decoded = DecodeGraph(p, cfg, ag::Mul(out.mask, out.fused));
  out.estimate = ag::FitLength(decoded, static_cast<int>(mix.NumSamples()));
  return out;
}

Matrix Encode(const Waveform &wave, const ParameterSet &params, const ModelConfig &cfg,
              int channel) {
  if (channel < 0 || channel > (UsesSecondEncoder(cfg.spatial_mode) ? 1 : 0))
    throw ValueError("no encoder for channel " + std::to_string(channel) + " in mode " +
                     SpatialModeName(cfg.spatial_mode));
  ag::Tape tape(false);
  ParamBinder p(&tape, params, false);
  return EncodeChannel(p, cfg, wave, channel).value();
}

Waveform Decode(const Matrix &rep, const ParameterSet &params, const ModelConfig &cfg) {
  ag::Tape tape(false);
  ParamBinder p(&tape, params, false);
  return FromRow(DecodeGraph(p, cfg, tape.Constant(rep)).value(), cfg.sample_rate);
}

Vector SpeakerEmbed(const Waveform &enrollment, const ParameterSet &params,
                    const ModelConfig &cfg) {
  CheckLength(enrollment.size(), cfg, "enrollment");
  ag::Tape tape(false);
  ParamBinder p(&tape, params, false);
  return SpeakerEmbedGraph(p, cfg, tape.Constant(AsRow(enrollment))).value().col(0);
}

Matrix Adapt(const Matrix &rep, const Vector &emb) {
  if (emb.size() != rep.rows())
    throw ShapeError("adapt: embedding length " + std::to_string(emb.size()) +
                     " != representation rows " + std::to_string(rep.rows()));
  return emb.asDiagonal() * rep;
}

Matrix EstimateMask(const Matrix &rep, const Vector &emb, const ParameterSet &params,
                    const ModelConfig &cfg, const Matrix *ipd) {
  ag::Tape tape(false);
  ParamBinder p(&tape, params, false);
  std::optional<ag::Var> ipd_var;
  if (ipd != nullptr) ipd_var = tape.Constant(*ipd);
  return EstimateMaskGraph(p, cfg, tape.Constant(rep), tape.Constant(emb), ipd_var).value();
}

Waveform Extract(const MultichannelMixture &mix, const Waveform &enrollment,
                 const ParameterSet &params, const ModelConfig &cfg) {
  ag::Tape tape(false);
  ParamBinder p(&tape, params, false);
  ForwardResult r = Forward(p, cfg, mix, enrollment);
  return FromRow(r.estimate.value(), cfg.sample_rate);
}

}  // namespace cdtse::tasnet
