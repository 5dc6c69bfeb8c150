// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_CHECKPOINT_H_
#define CDTSE_CHECKPOINT_H_

#include <filesystem>
#include <limits>
#include <string>

#include "cdtse/model_config.h"
#include "cdtse/params.h"
#include "json.hpp"

namespace cdtse {

inline constexpr const char *kCheckpointFormatVersion = "1";

// Everything needed to run a model and to resume training from it.
struct Checkpoint {
  ModelConfig config;
  ParameterSet params;
  int epoch = 0;  // completed epochs
  double valid_sisdr = std::numeric_limits<double>::quiet_NaN();
  double best_valid_sisdr = std::numeric_limits<double>::quiet_NaN();
  // Opaque trainer state (scheduler, early stopping, training config).
  nlohmann::json train_state = nlohmann::json::object();
  // Adam moments; empty when the checkpoint is inference-only.
  ParameterSet adam_m;
  ParameterSet adam_v;
};

// Layout: u64 little-endian header size, a JSON header, then raw tensor
// bytes. The header maps tensor names to {dtype, shape, data_offsets} and
// carries string metadata under "__metadata__" (format_version, config as
// canonical JSON, epoch, metrics, trainer state). Model parameters are
// float32, row-major; optimizer moments are float64.
void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt);

// Throws IoError for unreadable or malformed files, ValueError for an
// unsupported format_version or non-finite parameters, ShapeError when the
// tensors do not match the stored config.
Checkpoint LoadCheckpoint(const std::filesystem::path &path);

}  // namespace cdtse

#endif  // CDTSE_CHECKPOINT_H_
