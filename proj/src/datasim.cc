// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/datasim.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

namespace cdtse::datasim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSourceRms = 0.1;

std::mt19937_64 Rng(std::initializer_list<uint64_t> keys) {
  std::vector<uint32_t> words;
  for (uint64_t k : keys) {
    words.push_back(static_cast<uint32_t>(k));
    words.push_back(static_cast<uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

double Uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double Frac(double x) { return x - std::floor(x); }

// Lorentzian-shaped resonance.
double Resonance(double f, double centre, double bandwidth) {
  const double d = (f - centre) / bandwidth;
  return 1.0 / (1.0 + d * d);
}

// Speech-like loudness contour: syllables at 3-5 Hz with short dips.
std::vector<double> SyllableEnvelope(size_t n, int rate, std::mt19937_64 &rng) {
  const double syl_rate = Uniform(rng, 3.0, 5.0), phase = Uniform(rng, 0.0, kTwoPi);
  std::vector<double> env(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    env[i] = 0.15 + 0.85 * (0.5 - 0.5 * std::cos(kTwoPi * syl_rate * t + phase));
  }
  return env;
}

void NormalizeRms(std::vector<double> *x, double rms) {
  double e = 0.0;
  for (double v : *x) e += v * v;
  if (e == 0.0) return;
  const double g = rms / std::sqrt(e / x->size());
  for (double &v : *x) v *= g;
}

std::vector<double> TonalChirp(size_t n, int rate, int speaker, std::mt19937_64 &rng) {
  const double f0_base = 90.0 + 140.0 * Frac(speaker * 0.618034 + 0.05);
  const auto [f1, f2] = SpeakerFormants(speaker);
  const double offset = Uniform(rng, -0.08, 0.08), slope = Uniform(rng, -0.15, 0.15);
  const double vib_phase = Uniform(rng, 0.0, kTwoPi);
  const double duration = static_cast<double>(n) / rate;
  const int harmonics = static_cast<int>(0.45 * rate / (f0_base * 1.3));
  std::vector<double> phase(harmonics, 0.0);
  for (auto &p : phase) p = Uniform(rng, 0.0, kTwoPi);
  std::vector<double> out(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f0 = f0_base * (1.0 + offset) * (1.0 + slope * (t / duration - 0.5)) *
                      (1.0 + 0.02 * std::sin(kTwoPi * 5.0 * t + vib_phase));
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      const double f = f0 * (h + 1);
      phase[h] += kTwoPi * f / rate;
      if (f >= 0.45 * rate) continue;
      v += (Resonance(f, f1, 120.0) + 0.6 * Resonance(f, f2, 200.0)) * std::sin(phase[h]);
    }
    out[i] = v;
  }
  return out;
}

// Two-pole resonator y[n] = x[n] + 2r cos(w) y[n-1] - r^2 y[n-2].
std::vector<double> Resonate(const std::vector<double> &x, double centre, double bandwidth,
                             int rate) {
  const double r = std::exp(-std::numbers::pi * bandwidth / rate);
  const double a1 = 2.0 * r * std::cos(kTwoPi * centre / rate), a2 = -r * r;
  std::vector<double> y(x.size());
  double y1 = 0.0, y2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = (1.0 - r) * x[i] + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y[i];
  }
  return y;
}

std::vector<double> FilteredNoise(size_t n, int rate, int speaker, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(n);
  for (auto &v : white) v = gauss(rng);
  const auto [f1, f2] = SpeakerFormants(speaker);
  auto a = Resonate(white, f1, 80.0, rate), b = Resonate(white, f2, 150.0, rate);
  for (size_t i = 0; i < n; ++i) a[i] += 0.6 * b[i];
  return a;
}

float RoundF32(double v) { return static_cast<float>(v); }

std::vector<double> AsFloat32(const std::vector<double> &x) {
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = RoundF32(x[i]);
  return out;
}

double Energy(const std::vector<double> &x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

const char *kSplits[] = {"train", "valid", "test"};

}  // namespace

SourceKind ParseSourceKind(const std::string &name) {
  if (name == "tonal-chirp") return SourceKind::kTonalChirp;
  if (name == "filtered-noise") return SourceKind::kFilteredNoise;
  throw ValueError("unknown source kind '" + name + "' (tonal-chirp, filtered-noise)");
}

std::string SourceKindName(SourceKind kind) {
  return kind == SourceKind::kTonalChirp ? "tonal-chirp" : "filtered-noise";
}

std::pair<double, double> SpeakerFormants(int speaker_id) {
  return {350.0 + 600.0 * Frac(speaker_id * 0.381966 + 0.1),
          1200.0 + 1600.0 * Frac(speaker_id * 0.723607 + 0.3)};
}

Waveform SynthSource(SourceKind kind, double duration_s, uint64_t seed, int speaker_id,
                     int sample_rate) {
  if (!(duration_s > 0.0)) throw ValueError("source duration must be positive");
  if (speaker_id < 0) throw ValueError("speaker id must be non-negative");
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) throw ValueError("source duration shorter than one sample");
  auto rng = Rng({seed, static_cast<uint64_t>(speaker_id), static_cast<uint64_t>(kind)});
  std::vector<double> x = kind == SourceKind::kTonalChirp
                              ? TonalChirp(n, sample_rate, speaker_id, rng)
                              : FilteredNoise(n, sample_rate, speaker_id, rng);
  const auto env = SyllableEnvelope(n, sample_rate, rng);
  for (size_t i = 0; i < n; ++i) x[i] *= env[i];
  NormalizeRms(&x, kSourceRms);
  return Waveform(std::move(x), sample_rate);
}

void RoomSpec::Validate() const {
  if (!(rt60_proxy >= 0.0 && rt60_proxy <= 0.6))
    throw ValueError("rt60_proxy must lie in [0, 0.6] s");
  if (num_echoes < 0 || max_delay < 0 || inter_channel_delay_range < 0)
    throw ValueError("echo count and delays must be non-negative");
  if (num_echoes > 0 && rt60_proxy > 0.0 && max_delay < 1)
    throw ValueError("echoes need max_delay >= 1");
}

int InterChannelDelay(const RoomSpec &room) {
  auto rng = Rng({room.seed, 0x1cdULL});
  return std::uniform_int_distribution<int>(0, room.inter_channel_delay_range)(rng);
}

std::vector<double> MakeRir(const RoomSpec &room, int channel, int sample_rate) {
  room.Validate();
  if (channel != 0 && channel != 1) throw ValueError("RIRs exist for channels 0 and 1 only");
  const int direct = channel == 1 ? InterChannelDelay(room) : 0;
  std::vector<std::pair<int, double>> taps = {{direct, 1.0}};
  if (room.rt60_proxy > 0.0) {
    auto rng = Rng({room.seed, static_cast<uint64_t>(channel), 0xec40ULL});
    std::uniform_int_distribution<int> delay(1, std::max(1, room.max_delay));
    for (int k = 0; k < room.num_echoes; ++k) {
      const int d = delay(rng);
      const double sign = (rng() & 1) ? 1.0 : -1.0;
      // 60 dB amplitude decay over rt60: exp(-ln(1000) t / rt60).
      const double decay = std::exp(-std::log(1000.0) * d / (room.rt60_proxy * sample_rate));
      taps.emplace_back(direct + d, sign * Uniform(rng, 0.3, 0.8) * decay);
    }
  }
  int length = 0;
  for (const auto &[d, a] : taps) length = std::max(length, d + 1);
  std::vector<double> h(length, 0.0);
  for (const auto &[d, a] : taps) h[d] += a;
  return h;
}

Waveform ApplyRir(const Waveform &wave, const RoomSpec &room, int channel) {
  const auto h = MakeRir(room, channel, wave.sample_rate);
  const size_t n = wave.size();
  std::vector<double> out(n, 0.0);
  for (size_t k = 0; k < h.size(); ++k) {
    if (h[k] == 0.0) continue;
    for (size_t i = k; i < n; ++i) out[i] += h[k] * wave.samples[i - k];
  }
  return Waveform(std::move(out), wave.sample_rate);
}

std::string MixtureRecord::Id() const {
  return std::filesystem::path(mixture_path).stem().string();
}

std::vector<MixtureRecord> ReadManifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string &p) {
    std::filesystem::path f(p);
    return (f.is_absolute() ? f : dir / f).lexically_normal().string();
  };
  std::vector<MixtureRecord> records;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      MixtureRecord r;
      r.mixture_path = resolve(j.at("mixture_path").get<std::string>());
      r.target_path = resolve(j.at("target_path").get<std::string>());
      r.enrollment_path = resolve(j.at("enrollment_path").get<std::string>());
      r.speaker_id = j.at("speaker_id").get<int>();
      r.snr_db = j.at("snr_db").get<double>();
      if (r.speaker_id < 0) throw ValueError("negative speaker_id");
      records.push_back(std::move(r));
    } catch (const std::exception &e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad manifest line: " +
                    e.what());
    }
  }
  return records;
}

void WriteManifest(const std::filesystem::path &path, const std::vector<MixtureRecord> &records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto &r : records) {
    nlohmann::json j = {{"mixture_path", r.mixture_path},
                        {"target_path", r.target_path},
                        {"enrollment_path", r.enrollment_path},
                        {"speaker_id", r.speaker_id},
                        {"snr_db", r.snr_db}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("short write to manifest " + path.string());
}

void DatasetSpec::Validate() const {
  if (n_train < 0 || n_valid < 0 || n_test < 0) throw ValueError("record counts must be >= 0");
  if (num_speakers < 2) throw ValueError("mixtures need at least 2 speakers");
  if (!(duration_s > 0.0) || !(enrollment_duration_s > 0.0))
    throw ValueError("durations must be positive");
  if (!(sir_range_db >= 0.0)) throw ValueError("sir range must be non-negative");
  if (sample_rate <= 0) throw ValueError("sample rate must be positive");
  room.Validate();
}

DatasetPaths MakeDataset(const DatasetSpec &spec, const std::filesystem::path &out_dir) {
  spec.Validate();
  const int counts[] = {spec.n_train, spec.n_valid, spec.n_test};
  const uint64_t seed = spec.room.seed;
  std::error_code ec;
  DatasetPaths paths{out_dir / "train.jsonl", out_dir / "valid.jsonl", out_dir / "test.jsonl"};
  std::filesystem::path *manifests[] = {&paths.train, &paths.valid, &paths.test};

  for (int split = 0; split < 3; ++split) {
    const std::string name = kSplits[split];
    for (const char *sub : {"mix", "target", "enroll"}) {
      std::filesystem::create_directories(out_dir / name / sub, ec);
      if (ec) throw IoError("cannot create " + (out_dir / name / sub).string() + ": " + ec.message());
    }
    std::vector<MixtureRecord> records;
    for (int i = 0; i < counts[split]; ++i) {
      auto rng = Rng({seed, static_cast<uint64_t>(split), static_cast<uint64_t>(i)});
      const int target_spk =
          std::uniform_int_distribution<int>(0, spec.num_speakers - 1)(rng);
      int other = std::uniform_int_distribution<int>(0, spec.num_speakers - 2)(rng);
      if (other >= target_spk) ++other;
      const uint64_t utt_target = rng(), utt_interf = rng();
      uint64_t utt_enroll = rng();
      if (utt_enroll == utt_target) ++utt_enroll;
      const double sir = Uniform(rng, -spec.sir_range_db, spec.sir_range_db);
      RoomSpec room_t = spec.room, room_i = spec.room;
      room_t.seed = rng();
      room_i.seed = rng();

      const Waveform dry_t = SynthSource(spec.kind, spec.duration_s, utt_target, target_spk,
                                         spec.sample_rate);
      const Waveform dry_i =
          SynthSource(spec.kind, spec.duration_s, utt_interf, other, spec.sample_rate);
      const Waveform enroll = SynthSource(spec.kind, spec.enrollment_duration_s, utt_enroll,
                                          target_spk, spec.sample_rate);
      std::vector<double> t[2], v[2];
      for (int c = 0; c < 2; ++c) {
        t[c] = ApplyRir(dry_t, room_t, c).samples;
        v[c] = ApplyRir(dry_i, room_i, c).samples;
      }
      // Scale the interferer for the drawn SIR on the reference channel,
      // then apply one common gain keeping peaks below 0.9.
      const double gi = std::sqrt(Energy(t[0]) / (Energy(v[0]) * std::pow(10.0, sir / 10.0)));
      double peak = 0.0;
      for (int c = 0; c < 2; ++c)
        for (size_t k = 0; k < t[c].size(); ++k) {
          v[c][k] *= gi;
          peak = std::max(peak, std::abs(t[c][k] + v[c][k]));
        }
      const double g = peak > 0.9 ? 0.9 / peak : 1.0;
      std::vector<Waveform> mix_ch;
      std::vector<double> target0;
      for (int c = 0; c < 2; ++c) {
        std::vector<double> tc(t[c].size()), m(t[c].size());
        for (size_t k = 0; k < m.size(); ++k) {
          tc[k] = RoundF32(g * t[c][k]);
          m[k] = RoundF32(tc[k] + RoundF32(g * v[c][k]));
        }
        if (c == 0) target0 = tc;
        mix_ch.emplace_back(std::move(m), spec.sample_rate);
      }

      char id[64];
      std::snprintf(id, sizeof(id), "%s_%05d", name.c_str(), i);
      MixtureRecord r;
      r.mixture_path = name + "/mix/" + id + ".wav";
      r.target_path = name + "/target/" + id + ".wav";
      r.enrollment_path = name + "/enroll/" + id + ".wav";
      r.speaker_id = target_spk;
      r.snr_db = sir;
      WriteWav((out_dir / r.mixture_path).string(), MultichannelMixture(std::move(mix_ch)));
      WriteWav((out_dir / r.target_path).string(), Waveform(target0, spec.sample_rate));
      WriteWav((out_dir / r.enrollment_path).string(),
               Waveform(AsFloat32(enroll.samples), spec.sample_rate));
      records.push_back(std::move(r));
    }
    WriteManifest(*manifests[split], records);
  }
  return paths;
}

}  // namespace cdtse::datasim
