// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_RUN_CONFIG_H_
#define CDTSE_RUN_CONFIG_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cdtse/datasim.h"
#include "cdtse/pipeline.h"

namespace cdtse {

// Everything an experiment needs, addressable by dotted keys:
//   preset, run_dir, model.*, train.*, data.*, room.*
// Files hold one `key = value` per line; `#` starts a comment.
struct RunConfig {
  std::string preset = "default";
  std::string run_dir;
  pipeline::TrainConfig train;  // train.model is addressed as model.*
  datasim::DatasetSpec data;    // data.room is addressed as room.*

  // Sets one key from its text form; ValueError on unknown keys or bad values.
  void Set(const std::string &key, const std::string &value);
  std::string Get(const std::string &key) const;

  // Every key except `preset`, in a stable order.
  static const std::vector<std::string> &Keys();

  // Effective config in the file format, loadable by LoadRunConfig.
  std::string ToText() const;
  void Validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Parses `key = value` lines. Errors carry "path:line:".
KeyValues ParseConfigText(const std::string &text, const std::string &origin);
KeyValues ReadConfigFile(const std::filesystem::path &path);

// Defaults, then the preset, then file entries, then overrides. A `preset`
// entry in either layer applies before any other key; the override wins.
RunConfig ResolveRunConfig(const KeyValues &file, const KeyValues &overrides);

}  // namespace cdtse

#endif  // CDTSE_RUN_CONFIG_H_
