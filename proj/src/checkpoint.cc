// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace cdtse {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

const char *kMomentM = "optimizer.m/";
const char *kMomentV = "optimizer.v/";

// NaN is not representable in JSON; store it as null.
nlohmann::json Number(double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); }
double Number(const nlohmann::json &j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

template <typename T>
void AppendTensor(const std::string &name, const Matrix &m, const char *dtype,
                  nlohmann::json *header, std::vector<char> *data) {
  const size_t begin = data->size();
  data->resize(begin + sizeof(T) * m.size());
  char *out = data->data() + begin;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j, out += sizeof(T)) {
      const T v = static_cast<T>(m(i, j));
      std::memcpy(out, &v, sizeof(T));
    }
  (*header)[name] = {{"dtype", dtype},
                     {"shape", {m.rows(), m.cols()}},
                     {"data_offsets", {begin, data->size()}}};
}

template <typename T>
Matrix ReadTensor(const char *data, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j, data += sizeof(T)) {
      T v;
      std::memcpy(&v, data, sizeof(T));
      m(i, j) = v;
    }
  return m;
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  ckpt.config.Validate();
  CheckParameters(ckpt.params, ckpt.config);
  for (const auto &[name, m] : ckpt.params)
    if (!m.allFinite()) throw ValueError("refusing to save non-finite parameter " + name);
  nlohmann::json header = nlohmann::json::object();
  std::vector<char> data;
  for (const auto &[name, m] : ckpt.params) AppendTensor<float>(name, m, "F32", &header, &data);
  for (const auto &[name, m] : ckpt.adam_m)
    AppendTensor<double>(kMomentM + name, m, "F64", &header, &data);
  for (const auto &[name, m] : ckpt.adam_v)
    AppendTensor<double>(kMomentV + name, m, "F64", &header, &data);
  header["__metadata__"] = {
      {"format_version", kCheckpointFormatVersion},
      {"config", ToJson(ckpt.config).dump()},
      {"epoch", std::to_string(ckpt.epoch)},
      {"metrics", nlohmann::json{{"valid_sisdr", Number(ckpt.valid_sisdr)},
                                 {"best_valid_sisdr", Number(ckpt.best_valid_sisdr)}}
                      .dump()},
      {"train_state", ckpt.train_state.dump()},
  };
  std::string text = header.dump();
  // Pad so tensor data starts 8-byte aligned.
  text.append((8 - text.size() % 8) % 8, ' ');
  const uint64_t size = text.size();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char *>(&size), sizeof(size));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " +
                        ec.message());
}

Checkpoint LoadCheckpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  uint64_t size = 0;
  if (bytes.size() < sizeof(size)) throw IoError(path.string() + ": truncated checkpoint");
  std::memcpy(&size, bytes.data(), sizeof(size));
  if (size > bytes.size() - sizeof(size))
    throw IoError(path.string() + ": header length exceeds file size");
  const char *body = bytes.data() + sizeof(size) + size;
  const size_t body_size = bytes.size() - sizeof(size) - size;

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.data() + sizeof(size),
                                   bytes.data() + sizeof(size) + size);
  } catch (const nlohmann::json::exception &e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  if (!header.contains("__metadata__"))
    throw IoError(path.string() + ": checkpoint header has no metadata");
  const auto &meta = header["__metadata__"];
  const std::string version = meta.value("format_version", "");
  if (version != kCheckpointFormatVersion)
    throw ValueError(path.string() + ": unsupported checkpoint format_version '" + version +
                     "' (expected " + kCheckpointFormatVersion + ")");

  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfigFromJson(nlohmann::json::parse(meta.at("config").get<std::string>()));
    ckpt.epoch = std::stoi(meta.at("epoch").get<std::string>());
    auto metrics = nlohmann::json::parse(meta.at("metrics").get<std::string>());
    ckpt.valid_sisdr = Number(metrics.at("valid_sisdr"));
    ckpt.best_valid_sisdr = Number(metrics.at("best_valid_sisdr"));
    ckpt.train_state = nlohmann::json::parse(meta.at("train_state").get<std::string>());
  } catch (const nlohmann::json::exception &e) {
    throw IoError(path.string() + ": malformed checkpoint metadata: " + e.what());
  }

  for (const auto &[name, info] : header.items()) {
    if (name == "__metadata__") continue;
    const std::string dtype = info.at("dtype");
    const auto shape = info.at("shape").get<std::vector<Eigen::Index>>();
    const auto offsets = info.at("data_offsets").get<std::vector<size_t>>();
    const size_t width = dtype == "F32" ? 4 : dtype == "F64" ? 8 : 0;
    if (width == 0) throw IoError(path.string() + ": unsupported dtype " + dtype);
    if (shape.size() != 2 || offsets.size() != 2 || offsets[1] > body_size ||
        offsets[1] - offsets[0] != width * shape[0] * shape[1])
      throw IoError(path.string() + ": inconsistent tensor entry " + name);
    Matrix m = width == 4 ? ReadTensor<float>(body + offsets[0], shape[0], shape[1])
                          : ReadTensor<double>(body + offsets[0], shape[0], shape[1]);
    if (name.rfind(kMomentM, 0) == 0) {
      ckpt.adam_m[name.substr(std::strlen(kMomentM))] = std::move(m);
    } else if (name.rfind(kMomentV, 0) == 0) {
      ckpt.adam_v[name.substr(std::strlen(kMomentV))] = std::move(m);
    } else {
      if (!m.allFinite()) throw ValueError(path.string() + ": non-finite values in " + name);
      ckpt.params[name] = std::move(m);
    }
  }
  CheckParameters(ckpt.params, ckpt.config);
  return ckpt;
}

}  // namespace cdtse
