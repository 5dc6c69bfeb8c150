// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/checkpoint.h"

#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "cdtse/tasnet.h"
#include "test_util.h"

namespace cdtse {
namespace {

using testing::RandomMatrix;
using testing::TempDir;

Checkpoint MakeCheckpoint(SpatialMode mode, uint64_t seed) {
  Checkpoint c;
  c.config = ModelConfig::Micro();
  c.config.spatial_mode = mode;
  c.params = InitParameters(c.config, seed);
  std::mt19937_64 rng(seed);
  c.params["classifier.weight"] = RandomMatrix(c.config.num_speakers, c.config.N, rng);
  RoundToFloat32(&c.params);
  c.epoch = 7;
  c.valid_sisdr = 3.25;
  c.best_valid_sisdr = 4.5;
  c.train_state = {{"lr", 5e-4}, {"plateau", 2}};
  for (const auto &[name, m] : c.params) {
    c.adam_m[name] = RandomMatrix(m.rows(), m.cols(), rng, 1e-3);
    c.adam_v[name] = RandomMatrix(m.rows(), m.cols(), rng, 1e-6).cwiseAbs();
  }
  return c;
}

std::string ReadBytes(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBytes(const std::filesystem::path &p, const std::string &bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

TEST(CheckpointTest, RoundTripIsExact) {
  auto dir = TempDir("ckpt_roundtrip");
  for (SpatialMode mode : AllSpatialModes()) {
    Checkpoint c = MakeCheckpoint(mode, 3);
    SaveCheckpoint(dir / "a.ckpt", c);
    Checkpoint d = LoadCheckpoint(dir / "a.ckpt");
    EXPECT_EQ(ToJson(d.config), ToJson(c.config));
    ASSERT_EQ(d.params.size(), c.params.size());
    for (const auto &[name, m] : c.params) EXPECT_TRUE(d.params.at(name) == m) << name;
    for (const auto &[name, m] : c.adam_m) EXPECT_TRUE(d.adam_m.at(name) == m) << name;
    for (const auto &[name, m] : c.adam_v) EXPECT_TRUE(d.adam_v.at(name) == m) << name;
    EXPECT_EQ(d.epoch, 7);
    EXPECT_EQ(d.valid_sisdr, 3.25);
    EXPECT_EQ(d.best_valid_sisdr, 4.5);
    EXPECT_EQ(d.train_state, c.train_state);
  }
}

TEST(CheckpointTest, ForwardIsBitIdenticalAfterReload) {
  auto dir = TempDir("ckpt_forward");
  Checkpoint c = MakeCheckpoint(SpatialMode::kCdAdapt, 4);
  SaveCheckpoint(dir / "m.ckpt", c);
  Checkpoint d = LoadCheckpoint(dir / "m.ckpt");
  std::mt19937_64 rng(5);
  MultichannelMixture mix({Waveform(testing::RandomSignal(90, rng), 8000),
                           Waveform(testing::RandomSignal(90, rng), 8000)});
  Waveform enr(testing::RandomSignal(50, rng), 8000);
  EXPECT_TRUE(tasnet::Extract(mix, enr, c.params, c.config).samples ==
              tasnet::Extract(mix, enr, d.params, d.config).samples);
}

TEST(CheckpointTest, NanMetricsSurvive) {
  auto dir = TempDir("ckpt_nan");
  Checkpoint c = MakeCheckpoint(SpatialMode::kSingle, 6);
  c.valid_sisdr = std::nan("");
  c.adam_m.clear();
  c.adam_v.clear();
  SaveCheckpoint(dir / "n.ckpt", c);
  Checkpoint d = LoadCheckpoint(dir / "n.ckpt");
  EXPECT_TRUE(std::isnan(d.valid_sisdr));
  EXPECT_TRUE(d.adam_m.empty());
}

TEST(CheckpointTest, LayoutHasSizedJsonHeader) {
  auto dir = TempDir("ckpt_layout");
  Checkpoint c = MakeCheckpoint(SpatialMode::kCd, 7);
  SaveCheckpoint(dir / "l.ckpt", c);
  std::string bytes = ReadBytes(dir / "l.ckpt");
  uint64_t n = 0;
  std::memcpy(&n, bytes.data(), 8);
  ASSERT_LE(8 + n, bytes.size());
  EXPECT_EQ(n % 8, 0u);
  auto header = nlohmann::json::parse(bytes.substr(8, n));
  EXPECT_EQ(header["__metadata__"]["format_version"], kCheckpointFormatVersion);
  const auto &enc = header["encoder.0.weight"];
  EXPECT_EQ(enc["dtype"], "F32");
  EXPECT_EQ(enc["shape"], nlohmann::json({c.config.N, c.config.L}));
  // Row-major float32: element (0, 1) is the second value.
  const size_t begin = enc["data_offsets"][0];
  float v;
  std::memcpy(&v, bytes.data() + 8 + n + begin + 4, 4);
  EXPECT_EQ(static_cast<double>(v), c.params.at("encoder.0.weight")(0, 1));
}

TEST(CheckpointTest, RejectsUnknownFormatVersion) {
  auto dir = TempDir("ckpt_version");
  SaveCheckpoint(dir / "v.ckpt", MakeCheckpoint(SpatialMode::kSingle, 8));
  std::string bytes = ReadBytes(dir / "v.ckpt");
  uint64_t n = 0;
  std::memcpy(&n, bytes.data(), 8);
  auto header = nlohmann::json::parse(bytes.substr(8, n));
  header["__metadata__"]["format_version"] = "99";
  std::string text = header.dump();
  uint64_t m = text.size();
  std::string out(reinterpret_cast<const char *>(&m), 8);
  WriteBytes(dir / "v.ckpt", out + text + bytes.substr(8 + n));
  EXPECT_THROW(LoadCheckpoint(dir / "v.ckpt"), ValueError);
}

TEST(CheckpointTest, IoAndShapeErrors) {
  auto dir = TempDir("ckpt_errors");
  EXPECT_THROW(LoadCheckpoint(dir / "missing.ckpt"), IoError);
  WriteBytes(dir / "short.ckpt", "abc");
  EXPECT_THROW(LoadCheckpoint(dir / "short.ckpt"), IoError);
  SaveCheckpoint(dir / "t.ckpt", MakeCheckpoint(SpatialMode::kSingle, 9));
  std::string bytes = ReadBytes(dir / "t.ckpt");
  WriteBytes(dir / "t.ckpt", bytes.substr(0, bytes.size() - 16));
  EXPECT_THROW(LoadCheckpoint(dir / "t.ckpt"), IoError);
  EXPECT_THROW(SaveCheckpoint(dir / "nodir" / "x.ckpt", MakeCheckpoint(SpatialMode::kSingle, 9)),
               IoError);

  Checkpoint c = MakeCheckpoint(SpatialMode::kSingle, 10);
  c.params.erase("decoder.weight");
  EXPECT_THROW(SaveCheckpoint(dir / "x.ckpt", c), ShapeError);
  c = MakeCheckpoint(SpatialMode::kSingle, 10);
  c.params["decoder.weight"](0, 0) = std::nan("");
  EXPECT_THROW(SaveCheckpoint(dir / "x.ckpt", c), ValueError);
}

}  // namespace
}  // namespace cdtse
