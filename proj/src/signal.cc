// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/signal.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace cdtse {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

MultichannelMixture::MultichannelMixture(std::vector<Waveform> channels)
    : channels_(std::move(channels)) {
  if (channels_.empty()) throw ShapeError("mixture needs at least 1 channel");
  for (const auto &ch : channels_) {
    if (ch.size() != channels_[0].size())
      throw ShapeError("mixture channels differ in length");
    if (ch.sample_rate != channels_[0].sample_rate)
      throw ShapeError("mixture channels differ in sample rate");
  }
}

size_t MultichannelMixture::NumSamples() const {
  return channels_.empty() ? 0 : channels_[0].size();
}

int MultichannelMixture::SampleRate() const {
  return channels_.empty() ? 0 : channels_[0].sample_rate;
}

void CheckFinite(std::span<const double> samples, const std::string &what) {
  if (samples.empty()) throw ValueError(what + ": empty signal");
  for (double v : samples)
    if (!std::isfinite(v)) throw ValueError(what + ": non-finite sample");
}

// ---- WAV -------------------------------------------------------------------

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T LoadLe(const char *p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

WavError Corrupt(const std::string &path, const std::string &why) {
  return WavError(WavError::Kind::kUnsupported,
                  "unsupported/corrupt WAV '" + path + "': " + why);
}

}  // namespace

MultichannelMixture ReadWav(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw WavError(WavError::Kind::kMissingFile, "cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Corrupt(path, "missing RIFF/WAVE header");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const char *data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char *id = bytes.data() + pos;
    uint32_t size = LoadLe<uint32_t>(id + 4);
    size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size())
        throw Corrupt(path, "truncated fmt chunk");
      format = LoadLe<uint16_t>(bytes.data() + body);
      channels = LoadLe<uint16_t>(bytes.data() + body + 2);
      rate = LoadLe<uint32_t>(bytes.data() + body + 4);
      bits = LoadLe<uint16_t>(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw Corrupt(path, "truncated extensible fmt chunk");
        format = LoadLe<uint16_t>(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      // Tolerate writers that leave the size field at its placeholder.
      data_size = std::min<size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw Corrupt(path, "no fmt chunk");
  if (data == nullptr) throw Corrupt(path, "no data chunk");
  if (channels == 0 || rate == 0) throw Corrupt(path, "bad channel count/rate");
  bool is_int16 = format == kFormatPcm && bits == 16;
  bool is_float = format == kFormatFloat && bits == 32;
  if (!is_int16 && !is_float)
    throw Corrupt(path, "codec " + std::to_string(format) + "/" +
                            std::to_string(bits) + " bits");

  size_t frame_bytes = static_cast<size_t>(channels) * (bits / 8);
  size_t frames = data_size / frame_bytes;
  if (frames == 0)
    throw WavError(WavError::Kind::kEmpty, "zero-length audio in '" + path + "'");

  std::vector<Waveform> out(channels);
  for (auto &w : out) {
    w.sample_rate = static_cast<int>(rate);
    w.samples.resize(frames);
  }
  for (size_t t = 0; t < frames; ++t) {
    const char *frame = data + t * frame_bytes;
    for (uint16_t c = 0; c < channels; ++c) {
      if (is_int16) {
        out[c].samples[t] = LoadLe<int16_t>(frame + 2 * c) / 32768.0;
      } else {
        out[c].samples[t] = LoadLe<float>(frame + 4 * c);
      }
    }
  }
  return MultichannelMixture(std::move(out));
}

void WriteWav(const std::string &path, const MultichannelMixture &mix,
              SampleFormat format) {
  for (const auto &ch : mix.Channels()) CheckFinite(ch.view(), path);
  const uint16_t channels = static_cast<uint16_t>(mix.NumChannels());
  const uint16_t bits = format == SampleFormat::kInt16 ? 16 : 32;
  const uint16_t tag = format == SampleFormat::kInt16 ? kFormatPcm : kFormatFloat;
  const uint32_t rate = static_cast<uint32_t>(mix.SampleRate());
  const size_t frames = mix.NumSamples();
  const uint32_t block = channels * bits / 8;
  const uint32_t data_size = static_cast<uint32_t>(frames * block);

  std::vector<char> buf(44 + data_size);
  auto put = [&buf](size_t off, auto v) { std::memcpy(&buf[off], &v, sizeof(v)); };
  std::memcpy(&buf[0], "RIFF", 4);
  put(4, static_cast<uint32_t>(36 + data_size));
  std::memcpy(&buf[8], "WAVEfmt ", 8);
  put(16, uint32_t{16});
  put(20, tag);
  put(22, channels);
  put(24, rate);
  put(28, rate * block);
  put(32, static_cast<uint16_t>(block));
  put(34, bits);
  std::memcpy(&buf[36], "data", 4);
  put(40, data_size);
  char *p = buf.data() + 44;
  for (size_t t = 0; t < frames; ++t) {
    for (uint16_t c = 0; c < channels; ++c) {
      double v = mix.Channel(c).samples[t];
      if (format == SampleFormat::kInt16) {
        double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        int16_t s = static_cast<int16_t>(q);
        std::memcpy(p, &s, 2);
        p += 2;
      } else {
        float f = static_cast<float>(v);
        std::memcpy(p, &f, 4);
        p += 4;
      }
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw WavError(WavError::Kind::kUnwritable, "cannot write '" + path + "'");
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os)
    throw WavError(WavError::Kind::kUnwritable, "write failed for '" + path + "'");
}

void WriteWav(const std::string &path, const Waveform &wave, SampleFormat format) {
  WriteWav(path, MultichannelMixture({wave}), format);
}

// ---- STFT ------------------------------------------------------------------

Vector HannWindow(int length) {
  Vector w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

int NumFrames(size_t num_samples, int window_length, int hop_length) {
  if (num_samples < static_cast<size_t>(window_length)) return 0;
  return static_cast<int>((num_samples - window_length) / hop_length) + 1;
}

Spectrogram Stft(const Waveform &wave, int window_length, int hop_length) {
  if (hop_length < 1 || window_length < hop_length)
    throw ValueError("stft: need window_length >= hop_length >= 1");
  if (wave.size() < static_cast<size_t>(window_length))
    throw ShapeError("stft: signal shorter than one window");
  const int frames = NumFrames(wave.size(), window_length, hop_length);
  const int bins = window_length / 2 + 1;
  const Vector window = HannWindow(window_length);

  Spectrogram spec;
  spec.window_length = window_length;
  spec.hop_length = hop_length;
  spec.sample_rate = wave.sample_rate;
  spec.values.resize(bins, frames);

  Eigen::FFT<double> fft;
  std::vector<double> frame(window_length);
  std::vector<std::complex<double>> bins_out;
  for (int t = 0; t < frames; ++t) {
    const double *src = wave.samples.data() + static_cast<size_t>(t) * hop_length;
    for (int n = 0; n < window_length; ++n) frame[n] = src[n] * window[n];
    fft.fwd(bins_out, frame);
    for (int k = 0; k < bins; ++k) spec.values(k, t) = bins_out[k];
  }
  return spec;
}

Matrix IpdFeatures(const MultichannelMixture &mix, const IpdOptions &opts) {
  if (mix.NumChannels() != 2)
    throw ShapeError("ipd: expected exactly 2 channels, got " +
                     std::to_string(mix.NumChannels()));
  Spectrogram ref = Stft(mix.Channel(0), opts.window_length, opts.hop_length);
  Spectrogram aux = Stft(mix.Channel(1), opts.window_length, opts.hop_length);
  const int bins = ref.NumBins(), frames = ref.NumFrames();
  Matrix out(opts.include_sin ? 2 * bins : bins, frames);
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      std::complex<double> a = ref.values(f, t), b = aux.values(f, t);
      double dphi = 0.0;
      if (std::abs(a) > 0.0 && std::abs(b) > 0.0) dphi = std::arg(b) - std::arg(a);
      out(f, t) = std::cos(dphi);
      if (opts.include_sin) out(bins + f, t) = std::sin(dphi);
    }
  }
  return out;
}

Matrix UpsampleFrames(const Matrix &features, int target_frames) {
  if (target_frames < 1) throw ValueError("upsample: target_frames < 1");
  const Eigen::Index src = features.cols();
  if (src < 1) throw ShapeError("upsample: input has no frames");
  Matrix out(features.rows(), target_frames);
  for (int j = 0; j < target_frames; ++j)
    out.col(j) = features.col(static_cast<Eigen::Index>(j) * src / target_frames);
  return out;
}

}  // namespace cdtse
