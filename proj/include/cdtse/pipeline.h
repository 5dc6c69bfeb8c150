// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_PIPELINE_H_
#define CDTSE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cdtse/checkpoint.h"
#include "cdtse/datasim.h"
#include "cdtse/model_config.h"
#include "json.hpp"

namespace cdtse::pipeline {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double gradient_clip_norm = 5.0;
  uint64_t seed = 0;
  int patience = 10;             // epochs without validation gain before stopping
  double segment_length = 4.0;   // seconds
  int lr_plateau_epochs = 3;     // halve the rate after this many flat epochs
  double lr_decay = 0.5;
  ModelConfig model;

  void Validate() const;  // ValueError naming the offending field
};

nlohmann::json ToJson(const TrainConfig &cfg);
TrainConfig TrainConfigFromJson(const nlohmann::json &j);

// One manifest record loaded into memory.
struct Example {
  std::string id;
  MultichannelMixture mix;
  Waveform target;
  Waveform enrollment;
  int speaker_id = 0;
};

// Loads every record; throws WavError for missing files and ShapeError when
// mixture and target disagree in length or sample rate.
std::vector<Example> LoadExamples(const std::vector<datasim::MixtureRecord> &records);

// Raised when the loss turns NaN or infinite.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, int step, const std::string &id);
  int epoch() const { return epoch_; }
  int step() const { return step_; }

 private:
  int epoch_, step_;
};

// Learning-rate halving on validation plateaus plus early stopping.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int plateau_epochs, double decay, int patience);

  // Records one validation score; returns true when it is a new best.
  bool Update(double valid_sisdr);

  double lr() const { return lr_; }
  double best() const { return best_; }
  bool should_stop() const { return epochs_since_best_ >= patience_; }

  nlohmann::json State() const;
  void Restore(const nlohmann::json &state);

 private:
  double lr_;
  int plateau_epochs_;
  double decay_;
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int epochs_since_best_ = 0;
  int plateau_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_sisdr = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  // Receives best.ckpt, last.ckpt and train_log.jsonl. Empty: nothing saved.
  std::filesystem::path run_dir;
  // Continue from <run_dir>/last.ckpt when it exists.
  bool resume = false;
  // Stop after this many epochs in this call (0 = no limit); used to
  // interrupt a run deliberately.
  int max_epochs_this_call = 0;
  std::function<void(const EpochLog &)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochLog> history;  // epochs run in this call
  bool early_stopped = false;
};

// Adam on random fixed-length segments, global-norm clipping, learning rate
// halved on validation plateaus, early stopping, best-checkpoint selection
// by mean validation SiSDR.
TrainResult Train(const std::vector<Example> &train, const std::vector<Example> &valid,
                  const TrainConfig &cfg, const TrainOptions &opts = {});
TrainResult Train(const std::filesystem::path &train_manifest,
                  const std::filesystem::path &valid_manifest, const TrainConfig &cfg,
                  const TrainOptions &opts = {});

// Mean loss and its gradient over a batch.
double BatchLossAndGradient(const std::vector<const Example *> &batch,
                            const std::vector<std::pair<size_t, size_t>> &crops,
                            const ParameterSet &params, const ModelConfig &cfg,
                            ParameterSet *grads);

// Mean (clamped) SiSDR of the model over full utterances.
double ValidationSiSdr(const std::vector<Example> &valid, const ParameterSet &params,
                       const ModelConfig &cfg);

// ---- evaluation --------------------------------------------------------------

enum class MetricSet { kFull, kSiSdrOnly };

struct EvalRow {
  std::string id;
  std::optional<double> sdr_db;  // absent with MetricSet::kSiSdrOnly
  double sisdr_db = 0.0;
  double sisdri_db = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  size_t count = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by id
  std::vector<std::pair<std::string, std::string>> failures;  // id, message
  std::optional<Aggregate> sdr;
  Aggregate sisdr;
  Aggregate sisdri;

  nlohmann::json ToJson() const;
  // id,sdr_db,sisdr_db,sisdri_db
  std::string ToCsv() const;
  void Write(const std::filesystem::path &csv, const std::filesystem::path &json) const;
  // "SDR=<x> SiSDR=<y> SiSDRi=<z>"
  std::string Summary() const;
};

Aggregate Summarize(std::vector<double> values);

// Produces an estimate of the target for one record.
using Estimator = std::function<Waveform(const Example &)>;

Estimator ModelEstimator(const Checkpoint &ckpt);
Estimator OracleEstimator();       // the target itself
Estimator MixtureEstimator();      // reference channel of the mixture

// Per-record failures (missing files, shape errors) are collected in the
// report instead of aborting.
EvalReport Evaluate(const std::vector<datasim::MixtureRecord> &records, const Estimator &est,
                    MetricSet metrics = MetricSet::kFull);
EvalReport Evaluate(const std::filesystem::path &manifest, const Checkpoint &ckpt,
                    MetricSet metrics = MetricSet::kFull);

}  // namespace cdtse::pipeline

#endif  // CDTSE_PIPELINE_H_
