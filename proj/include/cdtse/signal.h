// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_SIGNAL_H_
#define CDTSE_SIGNAL_H_

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdtse/common.h"

namespace cdtse {

// Mono signal. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  size_t size() const { return samples.size(); }
  std::span<const double> view() const { return samples; }
};

// Channel 0 is the reference channel.
class MultichannelMixture {
 public:
  MultichannelMixture() = default;
  explicit MultichannelMixture(std::vector<Waveform> channels);

  size_t NumChannels() const { return channels_.size(); }
  size_t NumSamples() const;
  int SampleRate() const;
  const Waveform &Channel(size_t c) const { return channels_.at(c); }
  const std::vector<Waveform> &Channels() const { return channels_; }

 private:
  std::vector<Waveform> channels_;
};

// Throws ValueError if any sample is NaN/Inf or the signal is empty.
void CheckFinite(std::span<const double> samples, const std::string &what);

// ---- WAV I/O ---------------------------------------------------------------

class WavError : public Error {
 public:
  enum class Kind { kMissingFile, kUnsupported, kEmpty, kUnwritable };
  WavError(Kind kind, const std::string &msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class SampleFormat { kInt16, kFloat32 };

// Reads linear PCM int16 or IEEE float32 RIFF/WAVE files (including the
// WAVE_FORMAT_EXTENSIBLE wrapper). int16 values are scaled by 1/32768.
MultichannelMixture ReadWav(const std::string &path);

void WriteWav(const std::string &path, const MultichannelMixture &mix,
              SampleFormat format = SampleFormat::kFloat32);
void WriteWav(const std::string &path, const Waveform &wave,
              SampleFormat format = SampleFormat::kFloat32);

// ---- STFT / IPD ------------------------------------------------------------

struct Spectrogram {
  // frequency_bins x frames
  Eigen::MatrixXcd values;
  int window_length = 0;
  int hop_length = 0;
  int sample_rate = 0;

  int NumBins() const { return static_cast<int>(values.rows()); }
  int NumFrames() const { return static_cast<int>(values.cols()); }
};

// Periodic Hann window of the given length.
Vector HannWindow(int length);

// Number of full frames; the trailing partial frame is dropped.
int NumFrames(size_t num_samples, int window_length, int hop_length);

// One-sided STFT, no centering. Frame t covers [t*hop, t*hop + window).
Spectrogram Stft(const Waveform &wave, int window_length, int hop_length);

struct IpdOptions {
  int window_length = 256;
  int hop_length = 128;
  // Appends sin(dphase) rows below the cos(dphase) rows.
  bool include_sin = false;
};

// cos(angle(X1) - angle(X0)) per bin; bins where either channel has zero
// magnitude give phase difference 0. Requires exactly two channels.
Matrix IpdFeatures(const MultichannelMixture &mix, const IpdOptions &opts);

// Nearest-neighbour repetition along frames: out[:, j] = in[:, j*Tf/target].
Matrix UpsampleFrames(const Matrix &features, int target_frames);

}  // namespace cdtse

#endif  // CDTSE_SIGNAL_H_
