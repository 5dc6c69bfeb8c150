// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/pipeline.h"

#include <fstream>

#include <gtest/gtest.h>

#include "cdtse/metrics.h"
#include "test_util.h"

namespace cdtse::pipeline {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// One shared toy corpus for the whole suite.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(TempDir("pipeline"));
    datasim::DatasetSpec spec;
    spec.n_train = 32;
    spec.n_valid = 6;
    spec.n_test = 6;
    spec.num_speakers = 4;
    spec.duration_s = 0.5;
    spec.enrollment_duration_s = 0.5;
    spec.room.seed = 5;
    paths_ = new datasim::DatasetPaths(datasim::MakeDataset(spec, *dir_));
  }
  static void TearDownTestSuite() {
    delete dir_;
    delete paths_;
  }

  static TrainConfig Config() {
    TrainConfig c;
    c.model = ModelConfig::Toy();
    c.model.num_speakers = 4;
    c.epochs = 2;
    c.segment_length = 0.25;
    c.batch_size = 4;
    c.seed = 3;
    return c;
  }

  static fs::path *dir_;
  static datasim::DatasetPaths *paths_;
};

fs::path *PipelineTest::dir_ = nullptr;
datasim::DatasetPaths *PipelineTest::paths_ = nullptr;

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  c.model = ModelConfig::Toy();
  EXPECT_NO_THROW(c.Validate());
  c.gradient_clip_norm = 0.0;
  EXPECT_THROW(c.Validate(), ValueError);
  c = TrainConfig();
  c.epochs = 0;
  EXPECT_THROW(c.Validate(), ValueError);
  c = TrainConfig();
  c.segment_length = 1e-4;  // shorter than one encoder window
  EXPECT_THROW(c.Validate(), ValueError);
  c = TrainConfig();
  c.learning_rate = -1;
  EXPECT_THROW(c.Validate(), ValueError);
}

TEST(TrainConfigTest, JsonRoundTrip) {
  TrainConfig c;
  c.epochs = 9;
  c.seed = 77;
  c.model = ModelConfig::Micro();
  c.model.spatial_mode = SpatialMode::kIpd;
  EXPECT_EQ(ToJson(TrainConfigFromJson(ToJson(c))), ToJson(c));
}

TEST(SummarizeTest, MeanMedianCount) {
  Aggregate a = Summarize({3.0, 1.0, 2.0, 10.0});
  EXPECT_DOUBLE_EQ(a.mean, 4.0);
  EXPECT_DOUBLE_EQ(a.median, 2.5);
  EXPECT_EQ(a.count, 4u);
  EXPECT_DOUBLE_EQ(Summarize({5.0, 1.0, 2.0}).median, 2.0);
  EXPECT_EQ(Summarize({}).count, 0u);
}

TEST_F(PipelineTest, LossDecreasesOverTwoEpochs) {
  TrainResult r = Train(paths_->train, paths_->valid, Config());
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_LT(r.history[1].train_loss, r.history[0].train_loss);
  for (const auto &h : r.history) EXPECT_LE(h.valid_sisdr, r.best.valid_sisdr);
}

TEST_F(PipelineTest, ResumeMatchesUninterruptedRun) {
  TrainConfig cfg = Config();
  cfg.epochs = 3;
  cfg.model.num_speakers = 4;
  TrainOptions full;
  full.run_dir = TempDir("pipeline_full");
  TrainResult a = Train(paths_->train, paths_->valid, cfg, full);

  TrainOptions part;
  part.run_dir = TempDir("pipeline_resume");
  part.max_epochs_this_call = 1;
  TrainResult first = Train(paths_->train, paths_->valid, cfg, part);
  ASSERT_EQ(first.history.size(), 1u);
  part.max_epochs_this_call = 0;
  part.resume = true;
  TrainResult b = Train(paths_->train, paths_->valid, cfg, part);
  ASSERT_EQ(b.history.size(), 2u);
  EXPECT_EQ(b.history.front().epoch, 2);

  for (const auto &[name, m] : a.last.params) EXPECT_TRUE(b.last.params.at(name) == m) << name;
  EXPECT_EQ(Slurp(full.run_dir / "train_log.jsonl"), Slurp(part.run_dir / "train_log.jsonl"));
  EXPECT_EQ(Slurp(full.run_dir / "last.ckpt"), Slurp(part.run_dir / "last.ckpt"));
  EXPECT_EQ(Slurp(full.run_dir / "best.ckpt"), Slurp(part.run_dir / "best.ckpt"));
}

TEST_F(PipelineTest, BestCheckpointHasTopValidationScore) {
  TrainConfig cfg = Config();
  cfg.epochs = 4;
  TrainOptions opts;
  opts.run_dir = TempDir("pipeline_best");
  TrainResult r = Train(paths_->train, paths_->valid, cfg, opts);
  Checkpoint best = LoadCheckpoint(opts.run_dir / "best.ckpt");
  for (const auto &h : r.history) EXPECT_GE(best.valid_sisdr, h.valid_sisdr);
  // The stored score is reproducible from the stored parameters.
  auto valid = LoadExamples(datasim::ReadManifest(paths_->valid));
  EXPECT_EQ(ValidationSiSdr(valid, best.params, best.config), best.valid_sisdr);
  std::ifstream log(opts.run_dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], ++lines);
    for (const char *k : {"train_loss", "valid_sisdr", "lr"}) EXPECT_TRUE(j.contains(k));
  }
  EXPECT_EQ(lines, 4);
}

TEST(PlateauSchedulerTest, HalvesRateAndStopsEarly) {
  PlateauScheduler s(1e-3, 2, 0.5, 4);
  EXPECT_TRUE(s.Update(1.0));
  EXPECT_FALSE(s.Update(1.0));  // ties do not count as improvement
  EXPECT_EQ(s.lr(), 1e-3);
  EXPECT_FALSE(s.Update(0.5));
  EXPECT_EQ(s.lr(), 0.5e-3);
  EXPECT_FALSE(s.should_stop());
  EXPECT_FALSE(s.Update(0.9));
  EXPECT_EQ(s.lr(), 0.5e-3);
  EXPECT_FALSE(s.Update(0.9));
  EXPECT_EQ(s.lr(), 0.25e-3);
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best(), 1.0);
}

TEST(PlateauSchedulerTest, ImprovementResetsCounters) {
  PlateauScheduler s(1.0, 3, 0.5, 3);
  s.Update(0.0);
  s.Update(-1.0);
  s.Update(-1.0);
  EXPECT_TRUE(s.Update(2.0));
  s.Update(1.0);
  s.Update(1.0);
  EXPECT_EQ(s.lr(), 1.0);
  EXPECT_FALSE(s.should_stop());
  s.Update(1.0);
  EXPECT_EQ(s.lr(), 0.5);
  EXPECT_TRUE(s.should_stop());
}

TEST(PlateauSchedulerTest, StateRoundTrip) {
  PlateauScheduler a(1.0, 2, 0.5, 5), b(9.0, 2, 0.5, 5);
  EXPECT_TRUE(a.State()["best_valid_sisdr"].is_null());
  a.Update(3.0);
  a.Update(1.0);
  b.Restore(a.State());
  for (double v : {1.0, 0.0, 4.0, 2.0}) {
    EXPECT_EQ(a.Update(v), b.Update(v));
    EXPECT_EQ(a.lr(), b.lr());
    EXPECT_EQ(a.should_stop(), b.should_stop());
  }
}

// The rates in the training log follow the scheduler fed with the logged
// validation scores.
TEST_F(PipelineTest, LoggedRatesFollowScheduler) {
  TrainConfig cfg = Config();
  cfg.epochs = 5;
  cfg.lr_plateau_epochs = 1;
  cfg.patience = 2;
  cfg.learning_rate = 3e-2;  // large enough to make validation wander
  TrainResult r = Train(paths_->train, paths_->valid, cfg);
  PlateauScheduler s(cfg.learning_rate, cfg.lr_plateau_epochs, cfg.lr_decay, cfg.patience);
  for (const auto &h : r.history) {
    EXPECT_EQ(h.lr, s.lr()) << "epoch " << h.epoch;
    s.Update(h.valid_sisdr);
  }
  EXPECT_EQ(r.early_stopped, s.should_stop());
  EXPECT_EQ(r.history.size() < 5u, s.should_stop());
}

TEST_F(PipelineTest, NonFiniteLossAborts) {
  TrainConfig cfg = Config();
  cfg.learning_rate = 1e38;
  cfg.gradient_clip_norm = 1e30;
  try {
    Train(paths_->train, paths_->valid, cfg);
    FAIL() << "expected abort";
  } catch (const NonFiniteLossError &e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_GE(e.step(), 2);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST_F(PipelineTest, RejectsSpeakerInventoryMismatch) {
  TrainConfig cfg = Config();
  cfg.model.num_speakers = 2;
  EXPECT_THROW(Train(paths_->train, paths_->valid, cfg), ValueError);
}

TEST_F(PipelineTest, OracleAndMixtureAnchors) {
  auto records = datasim::ReadManifest(paths_->test);
  EvalReport oracle = Evaluate(records, OracleEstimator());
  EvalReport mixture = Evaluate(records, MixtureEstimator());
  ASSERT_EQ(oracle.rows.size(), records.size());
  ASSERT_EQ(mixture.rows.size(), records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    auto ex = LoadExamples({records[i]}).front();
    const double input = metrics::SiSdr(ex.target.samples, ex.mix.Channel(0).samples);
    const auto &o = oracle.rows[i];
    EXPECT_EQ(o.id, records[i].Id());  // manifest order is already sorted
    EXPECT_EQ(o.sisdr_db, metrics::kClampDb);
    EXPECT_EQ(o.sisdri_db, metrics::kClampDb - input);
    EXPECT_EQ(mixture.rows[i].sisdri_db, 0.0);
    EXPECT_EQ(mixture.rows[i].sisdr_db, input);
  }
  double sum = 0.0;
  for (const auto &r : mixture.rows) sum += r.sisdr_db;
  EXPECT_NEAR(mixture.sisdr.mean, sum / records.size(), 1e-9);
  EXPECT_EQ(mixture.sisdr.count, records.size());
}

TEST_F(PipelineTest, ReportFilesAndFailures) {
  auto records = datasim::ReadManifest(paths_->test);
  std::reverse(records.begin(), records.end());
  records.push_back(records.front());
  records.back().mixture_path += ".missing";
  EvalReport rep = Evaluate(records, MixtureEstimator(), MetricSet::kSiSdrOnly);
  EXPECT_EQ(rep.rows.size(), records.size() - 1);
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_TRUE(std::is_sorted(rep.rows.begin(), rep.rows.end(),
                             [](const auto &a, const auto &b) { return a.id < b.id; }));
  EXPECT_FALSE(rep.sdr.has_value());
  EXPECT_FALSE(rep.rows.front().sdr_db.has_value());

  auto dir = TempDir("pipeline_report");
  rep.Write(dir / "r.csv", dir / "r.json");
  std::ifstream csv(dir / "r.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "id,sdr_db,sisdr_db,sisdri_db");
  auto j = nlohmann::json::parse(Slurp(dir / "r.json"));
  EXPECT_TRUE(j["aggregates"]["sdr_db"].is_null());
  EXPECT_EQ(j["aggregates"]["sisdr_db"]["count"], rep.rows.size());
  EXPECT_EQ(rep.Summary().rfind("SDR=n/a SiSDR=", 0), 0u);

  EvalReport full = Evaluate(datasim::ReadManifest(paths_->test), MixtureEstimator());
  ASSERT_TRUE(full.sdr.has_value());
  EXPECT_TRUE(full.rows.front().sdr_db.has_value());
  EXPECT_EQ(full.Summary().find("SDR=n/a"), std::string::npos);
}

TEST_F(PipelineTest, TrainEvaluateIsDeterministic) {
  TrainConfig cfg = Config();
  std::string reports[2];
  for (auto &rep : reports) {
    TrainResult r = Train(paths_->train, paths_->valid, cfg);
    rep = Evaluate(paths_->test, r.best).ToJson().dump();
  }
  EXPECT_EQ(reports[0], reports[1]);
}

}  // namespace
}  // namespace cdtse::pipeline
