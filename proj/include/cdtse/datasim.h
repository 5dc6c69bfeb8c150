// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_DATASIM_H_
#define CDTSE_DATASIM_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdtse/signal.h"

// Synthetic two-channel reverberant two-speaker mixtures. Everything is
// deterministic per seed.
namespace cdtse::datasim {

enum class SourceKind { kTonalChirp, kFilteredNoise };

SourceKind ParseSourceKind(const std::string &name);  // "tonal-chirp" | "filtered-noise"
std::string SourceKindName(SourceKind kind);

// One utterance of `speaker_id`. The speaker fixes the pitch range and the
// spectral envelope; `seed` varies the pitch contour, syllable rhythm and
// noise. Output RMS is 0.1.
Waveform SynthSource(SourceKind kind, double duration_s, uint64_t seed, int speaker_id = 0,
                     int sample_rate = 8000);

// Centre frequencies (Hz) of the two resonances that shape a speaker.
std::pair<double, double> SpeakerFormants(int speaker_id);

struct RoomSpec {
  double rt60_proxy = 0.3;  // seconds for the echo train to decay by 60 dB
  int num_echoes = 6;
  int max_delay = 240;                // samples, latest echo
  int inter_channel_delay_range = 6;  // channel-1 delay drawn from [0, range]
  uint64_t seed = 0;                  // placement of one source

  void Validate() const;  // ValueError on rt60 outside [0, 0.6] or negative delays
};

// Inter-channel delay (samples) of the source placed by `room`.
int InterChannelDelay(const RoomSpec &room);

// Sparse echo train for one channel: unit direct path (delayed on channel 1)
// plus exponentially decaying echoes of random sign. Echo draws are
// independent per channel.
std::vector<double> MakeRir(const RoomSpec &room, int channel, int sample_rate = 8000);

// wave convolved with MakeRir(room, channel), truncated to the input length.
Waveform ApplyRir(const Waveform &wave, const RoomSpec &room, int channel);

// One line of a manifest. Paths are relative to the manifest directory on
// disk and resolved to full paths by ReadManifest.
struct MixtureRecord {
  std::string mixture_path;
  std::string target_path;
  std::string enrollment_path;
  int speaker_id = 0;
  double snr_db = 0.0;  // target-to-interferer level on channel 0

  // Stem of the mixture file name.
  std::string Id() const;
};

std::vector<MixtureRecord> ReadManifest(const std::filesystem::path &path);
void WriteManifest(const std::filesystem::path &path, const std::vector<MixtureRecord> &records);

struct DatasetSpec {
  int n_train = 100;
  int n_valid = 20;
  int n_test = 20;
  int num_speakers = 8;
  double duration_s = 1.0;             // mixture length
  double enrollment_duration_s = 1.0;  // anechoic, different utterance
  double sir_range_db = 2.5;           // SIR uniform in [-range, range]
  SourceKind kind = SourceKind::kTonalChirp;
  RoomSpec room;  // its seed is the dataset seed
  int sample_rate = 8000;

  void Validate() const;
};

struct DatasetPaths {
  std::filesystem::path train, valid, test;
};

// Writes <out>/{train,valid,test}.jsonl and float32 WAVs under
// <out>/<split>/{mix,target,enroll}/. Targets are the reverberant target on
// channel 0.
DatasetPaths MakeDataset(const DatasetSpec &spec, const std::filesystem::path &out_dir);

}  // namespace cdtse::datasim

#endif  // CDTSE_DATASIM_H_
