// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/run_config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cdtse {

namespace {

std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T ParseNumber(const std::string &key, const std::string &text) {
  T value{};
  const char *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValueError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

bool ParseBool(const std::string &key, const std::string &text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValueError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

// Binds a key to a member reached through `access`.
template <typename T, typename Access>
Field Bind(const std::string &key, Access access) {
  Field f;
  f.set = [key, access](RunConfig &c, const std::string &v) {
    if constexpr (std::is_same_v<T, bool>)
      access(c) = ParseBool(key, v);
    else if constexpr (std::is_same_v<T, std::string>)
      access(c) = v;
    else
      access(c) = ParseNumber<T>(key, v);
  };
  f.get = [access](const RunConfig &c) -> std::string {
    const T &v = access(const_cast<RunConfig &>(c));
    if constexpr (std::is_same_v<T, bool>)
      return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, std::string>)
      return v;
    else if constexpr (std::is_floating_point_v<T>)
      return FormatDouble(v);
    else
      return std::to_string(v);
  };
  return f;
}

#define CDTSE_FIELD(T, key, expr) \
  { key, Bind<T>(key, [](RunConfig &c) -> T & { return expr; }) }

const std::vector<std::pair<std::string, Field>> &Fields() {
  static const auto *fields = new std::vector<std::pair<std::string, Field>>{
      CDTSE_FIELD(std::string, "run_dir", c.run_dir),
      CDTSE_FIELD(int, "model.N", c.train.model.N),
      CDTSE_FIELD(int, "model.L", c.train.model.L),
      CDTSE_FIELD(int, "model.B", c.train.model.B),
      CDTSE_FIELD(int, "model.H", c.train.model.H),
      CDTSE_FIELD(int, "model.P", c.train.model.P),
      CDTSE_FIELD(int, "model.X", c.train.model.X),
      CDTSE_FIELD(int, "model.R", c.train.model.R),
      {"model.spatial_mode",
       {[](RunConfig &c, const std::string &v) { c.train.model.spatial_mode = ParseSpatialMode(v); },
        [](const RunConfig &c) { return SpatialModeName(c.train.model.spatial_mode); }}},
      CDTSE_FIELD(int, "model.num_speakers", c.train.model.num_speakers),
      CDTSE_FIELD(double, "model.alpha", c.train.model.alpha),
      CDTSE_FIELD(int, "model.sample_rate", c.train.model.sample_rate),
      CDTSE_FIELD(int, "model.ipd_window", c.train.model.ipd_window),
      CDTSE_FIELD(int, "model.ipd_hop", c.train.model.ipd_hop),
      CDTSE_FIELD(bool, "model.ipd_include_sin", c.train.model.ipd_include_sin),
      {"model.cd_fusion",
       {[](RunConfig &c, const std::string &v) {
          if (v == "sum")
            c.train.model.cd_fusion = CdFusion::kSum;
          else if (v == "concat")
            c.train.model.cd_fusion = CdFusion::kConcat;
          else
            throw ValueError("config key 'model.cd_fusion': expected sum or concat, got '" + v +
                             "'");
        },
        [](const RunConfig &c) {
          return std::string(c.train.model.cd_fusion == CdFusion::kSum ? "sum" : "concat");
        }}},
      CDTSE_FIELD(int, "train.epochs", c.train.epochs),
      CDTSE_FIELD(int, "train.batch_size", c.train.batch_size),
      CDTSE_FIELD(double, "train.learning_rate", c.train.learning_rate),
      CDTSE_FIELD(double, "train.gradient_clip_norm", c.train.gradient_clip_norm),
      CDTSE_FIELD(uint64_t, "train.seed", c.train.seed),
      CDTSE_FIELD(int, "train.patience", c.train.patience),
      CDTSE_FIELD(double, "train.segment_length", c.train.segment_length),
      CDTSE_FIELD(int, "train.lr_plateau_epochs", c.train.lr_plateau_epochs),
      CDTSE_FIELD(double, "train.lr_decay", c.train.lr_decay),
      CDTSE_FIELD(int, "data.n_train", c.data.n_train),
      CDTSE_FIELD(int, "data.n_valid", c.data.n_valid),
      CDTSE_FIELD(int, "data.n_test", c.data.n_test),
      CDTSE_FIELD(int, "data.num_speakers", c.data.num_speakers),
      CDTSE_FIELD(double, "data.duration_s", c.data.duration_s),
      CDTSE_FIELD(double, "data.enrollment_duration_s", c.data.enrollment_duration_s),
      CDTSE_FIELD(double, "data.sir_range_db", c.data.sir_range_db),
      {"data.kind",
       {[](RunConfig &c, const std::string &v) { c.data.kind = datasim::ParseSourceKind(v); },
        [](const RunConfig &c) { return datasim::SourceKindName(c.data.kind); }}},
      CDTSE_FIELD(uint64_t, "data.seed", c.data.room.seed),
      CDTSE_FIELD(int, "data.sample_rate", c.data.sample_rate),
      CDTSE_FIELD(double, "room.rt60_proxy", c.data.room.rt60_proxy),
      CDTSE_FIELD(int, "room.num_echoes", c.data.room.num_echoes),
      CDTSE_FIELD(int, "room.max_delay", c.data.room.max_delay),
      CDTSE_FIELD(int, "room.inter_channel_delay_range", c.data.room.inter_channel_delay_range),
  };
  return *fields;
}

#undef CDTSE_FIELD

const Field &Lookup(const std::string &key) {
  for (const auto &[k, f] : Fields())
    if (k == key) return f;
  throw ValueError("unknown config key '" + key + "'");
}

void ApplyPreset(RunConfig *c, const std::string &name) {
  c->train.model = ModelConfig::Preset(name);  // ValueError for unknown names
  c->preset = name;
}

}  // namespace

void RunConfig::Set(const std::string &key, const std::string &value) {
  if (key == "preset") {
    ApplyPreset(this, value);
    return;
  }
  Lookup(key).set(*this, value);
}

std::string RunConfig::Get(const std::string &key) const {
  if (key == "preset") return preset;
  return Lookup(key).get(*this);
}

const std::vector<std::string> &RunConfig::Keys() {
  static const auto *keys = [] {
    auto *k = new std::vector<std::string>;
    for (const auto &f : Fields()) k->push_back(f.first);
    return k;
  }();
  return *keys;
}

std::string RunConfig::ToText() const {
  std::ostringstream out;
  out << "preset = " << preset << '\n';
  for (const auto &key : Keys()) out << key << " = " << Get(key) << '\n';
  return out.str();
}

void RunConfig::Validate() const {
  train.Validate();
  data.Validate();
}

KeyValues ParseConfigText(const std::string &text, const std::string &origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ValueError(where + "expected 'key = value'");
    std::string key = Trim(line.substr(0, eq)), value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ValueError(where + "empty key");
    if (key != "preset") {
      try {
        Lookup(key);
      } catch (const ValueError &e) {
        throw ValueError(where + e.what());
      }
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues ReadConfigFile(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfigText(ss.str(), path.string());
}

RunConfig ResolveRunConfig(const KeyValues &file, const KeyValues &overrides) {
  RunConfig c;
  std::string preset;
  for (const auto *layer : {&file, &overrides})
    for (const auto &[k, v] : *layer)
      if (k == "preset") preset = v;
  if (!preset.empty()) ApplyPreset(&c, preset);
  for (const auto *layer : {&file, &overrides})
    for (const auto &[k, v] : *layer)
      if (k != "preset") c.Set(k, v);
  return c;
}

}  // namespace cdtse
