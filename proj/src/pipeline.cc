// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cdtse/metrics.h"
#include "cdtse/objective.h"
#include "cdtse/optim.h"
#include "cdtse/tasnet.h"

namespace cdtse::pipeline {

namespace fs = std::filesystem;

namespace {

std::mt19937_64 EpochRng(uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(epoch), 0x7a11u};
  return std::mt19937_64(seq);
}

Waveform Slice(const Waveform &w, size_t offset, size_t length) {
  return Waveform(std::vector<double>(w.samples.begin() + offset,
                                      w.samples.begin() + offset + length),
                  w.sample_rate);
}

MultichannelMixture Slice(const MultichannelMixture &m, size_t offset, size_t length) {
  std::vector<Waveform> ch;
  for (const auto &c : m.Channels()) ch.push_back(Slice(c, offset, length));
  return MultichannelMixture(std::move(ch));
}

void CheckExamples(const std::vector<Example> &examples, const ModelConfig &cfg,
                   const char *split) {
  for (const auto &ex : examples) {
    if (ex.speaker_id < 0 || ex.speaker_id >= cfg.num_speakers)
      throw ValueError(std::string(split) + " record " + ex.id + " has speaker_id " +
                       std::to_string(ex.speaker_id) + " but the model has " +
                       std::to_string(cfg.num_speakers) + " speakers");
    tasnet::CheckInputs(ex.mix, ex.enrollment, cfg);
  }
}

nlohmann::json StateJson(const PlateauScheduler &sched, const optim::Adam &adam,
                         const TrainConfig &cfg) {
  nlohmann::json j = sched.State();
  j["adam_step"] = adam.step();
  j["train_config"] = ToJson(cfg);
  return j;
}

void AppendLog(const fs::path &path, const EpochLog &log) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << nlohmann::json{{"epoch", log.epoch},
                        {"train_loss", log.train_loss},
                        {"valid_sisdr", log.valid_sisdr},
                        {"lr", log.lr}}
             .dump()
      << '\n';
}

// Keeps the log lines of epochs up to `last_epoch`.
void TruncateLog(const fs::path &path, int last_epoch) {
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.value("epoch", 0) <= last_epoch) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto &l : keep) out << l << '\n';
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 1) throw ValueError("train.epochs must be >= 1");
  if (batch_size < 1) throw ValueError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValueError("train.learning_rate must be positive");
  if (!(gradient_clip_norm > 0.0)) throw ValueError("train.gradient_clip_norm must be positive");
  if (patience < 1) throw ValueError("train.patience must be >= 1");
  if (lr_plateau_epochs < 1) throw ValueError("train.lr_plateau_epochs must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValueError("train.lr_decay must be in (0, 1]");
  model.Validate();
  if (!(segment_length > 0.0) || segment_length * model.sample_rate < model.L)
    throw ValueError("train.segment_length must cover at least one encoder window");
}

PlateauScheduler::PlateauScheduler(double lr, int plateau_epochs, double decay, int patience)
    : lr_(lr), plateau_epochs_(plateau_epochs), decay_(decay), patience_(patience) {}

bool PlateauScheduler::Update(double valid_sisdr) {
  if (valid_sisdr > best_) {
    best_ = valid_sisdr;
    epochs_since_best_ = 0;
    plateau_ = 0;
    return true;
  }
  ++epochs_since_best_;
  if (++plateau_ >= plateau_epochs_) {
    lr_ *= decay_;
    plateau_ = 0;
  }
  return false;
}

nlohmann::json PlateauScheduler::State() const {
  return {{"lr", lr_},
          {"best_valid_sisdr", std::isfinite(best_) ? nlohmann::json(best_) : nlohmann::json()},
          {"epochs_since_best", epochs_since_best_},
          {"plateau", plateau_}};
}

void PlateauScheduler::Restore(const nlohmann::json &j) {
  lr_ = j.at("lr");
  best_ = j.at("best_valid_sisdr").is_null() ? -std::numeric_limits<double>::infinity()
                                              : j.at("best_valid_sisdr").get<double>();
  epochs_since_best_ = j.at("epochs_since_best");
  plateau_ = j.at("plateau");
}

nlohmann::json ToJson(const TrainConfig &c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"gradient_clip_norm", c.gradient_clip_norm},
          {"seed", c.seed},
          {"patience", c.patience},
          {"segment_length", c.segment_length},
          {"lr_plateau_epochs", c.lr_plateau_epochs},
          {"lr_decay", c.lr_decay},
          {"model", ToJson(c.model)}};
}

TrainConfig TrainConfigFromJson(const nlohmann::json &j) {
  TrainConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.gradient_clip_norm = j.at("gradient_clip_norm");
  c.seed = j.at("seed");
  c.patience = j.at("patience");
  c.segment_length = j.at("segment_length");
  c.lr_plateau_epochs = j.at("lr_plateau_epochs");
  c.lr_decay = j.at("lr_decay");
  c.model = ModelConfigFromJson(j.at("model"));
  return c;
}

std::vector<Example> LoadExamples(const std::vector<datasim::MixtureRecord> &records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto &r : records) {
    Example ex;
    ex.id = r.Id();
    ex.mix = ReadWav(r.mixture_path);
    MultichannelMixture target = ReadWav(r.target_path);
    MultichannelMixture enroll = ReadWav(r.enrollment_path);
    if (target.NumChannels() != 1 || enroll.NumChannels() != 1)
      throw ShapeError(ex.id + ": target and enrollment must be mono");
    ex.target = target.Channel(0);
    ex.enrollment = enroll.Channel(0);
    if (ex.target.size() != ex.mix.NumSamples() || ex.target.sample_rate != ex.mix.SampleRate())
      throw ShapeError(ex.id + ": target and mixture differ in length or sample rate");
    ex.speaker_id = r.speaker_id;
    out.push_back(std::move(ex));
  }
  return out;
}

NonFiniteLossError::NonFiniteLossError(int epoch, int step, const std::string &id)
    : Error("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
            std::to_string(step) + " (batch starting with record " + id + ")"),
      epoch_(epoch),
      step_(step) {}

double BatchLossAndGradient(const std::vector<const Example *> &batch,
                            const std::vector<std::pair<size_t, size_t>> &crops,
                            const ParameterSet &params, const ModelConfig &cfg,
                            ParameterSet *grads) {
  *grads = ZerosLike(params);
  double total = 0.0;
  for (size_t b = 0; b < batch.size(); ++b) {
    const Example &ex = *batch[b];
    const auto [offset, length] = crops[b];
    MultichannelMixture mix = Slice(ex.mix, offset, length);
    Waveform target = Slice(ex.target, offset, length);
    ag::Tape tape(true);
    ParamBinder binder(&tape, params, true);
    tasnet::ForwardResult r = tasnet::Forward(binder, cfg, mix, ex.enrollment);
    objective::LossVars loss =
        objective::MultitaskLoss(target.samples, r.estimate, r.embedding, ex.speaker_id,
                                 binder("classifier.weight"), cfg.alpha);
    const double value = loss.total.value()(0, 0);
    total += value;
    if (!std::isfinite(value)) continue;
    tape.Backward(loss.total);
    binder.AccumulateGradients(grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto &[name, g] : *grads) g *= inv;
  return total * inv;
}

double ValidationSiSdr(const std::vector<Example> &valid, const ParameterSet &params,
                       const ModelConfig &cfg) {
  double sum = 0.0;
  for (const auto &ex : valid) {
    Waveform est = tasnet::Extract(ex.mix, ex.enrollment, params, cfg);
    sum += metrics::SiSdr(ex.target.samples, est.samples);
  }
  return valid.empty() ? 0.0 : sum / static_cast<double>(valid.size());
}

TrainResult Train(const std::vector<Example> &train, const std::vector<Example> &valid,
                  const TrainConfig &cfg, const TrainOptions &opts) {
  cfg.Validate();
  if (train.empty()) throw ValueError("training set is empty");
  if (valid.empty()) throw ValueError("validation set is empty");
  const ModelConfig &model = cfg.model;
  CheckExamples(train, model, "train");
  CheckExamples(valid, model, "valid");
  const size_t segment =
      static_cast<size_t>(std::llround(cfg.segment_length * model.sample_rate));

  const bool save = !opts.run_dir.empty();
  const fs::path best_path = opts.run_dir / "best.ckpt";
  const fs::path last_path = opts.run_dir / "last.ckpt";
  const fs::path log_path = opts.run_dir / "train_log.jsonl";
  if (save) {
    std::error_code ec;
    fs::create_directories(opts.run_dir, ec);
    if (ec) throw IoError("cannot create run dir " + opts.run_dir.string() + ": " + ec.message());
  }

  TrainResult result;
  ParameterSet params = InitParameters(model, cfg.seed);
  optim::Adam adam(params);
  PlateauScheduler sched(cfg.learning_rate, cfg.lr_plateau_epochs, cfg.lr_decay, cfg.patience);
  int start_epoch = 1;
  result.best.config = model;

  if (save && opts.resume && fs::exists(last_path)) {
    Checkpoint last = LoadCheckpoint(last_path);
    if (ToJson(last.config) != ToJson(model))
      throw ValueError("cannot resume: " + last_path.string() +
                       " was trained with a different model config");
    params = last.params;
    const auto &st = last.train_state;
    adam.Restore(st.at("adam_step").get<int64_t>(), last.adam_m, last.adam_v);
    sched.Restore(st);
    start_epoch = last.epoch + 1;
    result.best = fs::exists(best_path) ? LoadCheckpoint(best_path) : last;
    result.last = last;
    TruncateLog(log_path, last.epoch);
  } else if (save) {
    std::ofstream(log_path, std::ios::trunc);
  }

  int run_this_call = 0;
  for (int epoch = start_epoch; epoch <= cfg.epochs && !sched.should_stop(); ++epoch) {
    if (opts.max_epochs_this_call > 0 && run_this_call >= opts.max_epochs_this_call) break;
    ++run_this_call;
    auto rng = EpochRng(cfg.seed, epoch);
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    // Random crops, grouped by resulting length so batches are uniform.
    std::vector<std::pair<size_t, size_t>> crop(train.size());
    std::vector<size_t> lengths;
    std::map<size_t, std::vector<size_t>> groups;
    for (size_t idx : order) {
      const size_t n = train[idx].mix.NumSamples();
      size_t offset = 0, length = n;
      if (n > segment) {
        offset = std::uniform_int_distribution<size_t>(0, n - segment)(rng);
        length = segment;
      }
      crop[idx] = {offset, length};
      if (!groups.count(length)) lengths.push_back(length);
      groups[length].push_back(idx);
    }
    std::vector<std::vector<size_t>> batches;
    for (size_t len : lengths) {
      const auto &g = groups[len];
      for (size_t i = 0; i < g.size(); i += cfg.batch_size)
        batches.emplace_back(g.begin() + i,
                             g.begin() + std::min(g.size(), i + cfg.batch_size));
    }
    std::shuffle(batches.begin(), batches.end(), rng);

    double loss_sum = 0.0;
    size_t seen = 0;
    int step = 0;
    for (const auto &b : batches) {
      ++step;
      std::vector<const Example *> items;
      std::vector<std::pair<size_t, size_t>> crops;
      for (size_t idx : b) {
        items.push_back(&train[idx]);
        crops.push_back(crop[idx]);
      }
      ParameterSet grads;
      const double loss = BatchLossAndGradient(items, crops, params, model, &grads);
      if (!std::isfinite(loss) || !std::isfinite(SquaredNorm(grads)))
        throw NonFiniteLossError(epoch, step, items.front()->id);
      optim::ClipGradNorm(&grads, cfg.gradient_clip_norm);
      adam.Step(&params, grads, sched.lr());
      loss_sum += loss * static_cast<double>(b.size());
      seen += b.size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(seen);
    log.valid_sisdr = ValidationSiSdr(valid, params, model);
    log.lr = sched.lr();
    const bool improved = sched.Update(log.valid_sisdr);

    Checkpoint ckpt;
    ckpt.config = model;
    ckpt.params = params;
    ckpt.epoch = epoch;
    ckpt.valid_sisdr = log.valid_sisdr;
    ckpt.best_valid_sisdr = sched.best();
    ckpt.train_state = StateJson(sched, adam, cfg);
    if (improved) {
      result.best = ckpt;
      if (save) SaveCheckpoint(best_path, ckpt);
    }
    ckpt.adam_m = adam.m();
    ckpt.adam_v = adam.v();
    if (save) {
      SaveCheckpoint(last_path, ckpt);
      AppendLog(log_path, log);
    }
    result.last = std::move(ckpt);
    result.history.push_back(log);
    if (opts.on_epoch) opts.on_epoch(log);
  }
  result.early_stopped = sched.should_stop();
  return result;
}

TrainResult Train(const fs::path &train_manifest, const fs::path &valid_manifest,
                  const TrainConfig &cfg, const TrainOptions &opts) {
  return Train(LoadExamples(datasim::ReadManifest(train_manifest)),
               LoadExamples(datasim::ReadManifest(valid_manifest)), cfg, opts);
}

// ---- evaluation --------------------------------------------------------------

Aggregate Summarize(std::vector<double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.count);
  std::sort(values.begin(), values.end());
  const size_t mid = a.count / 2;
  a.median = a.count % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return a;
}

namespace {

nlohmann::json AggregateJson(const Aggregate &a) {
  return {{"mean", a.mean}, {"median", a.median}, {"count", a.count}};
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto &r : rows)
    rows_json.push_back({{"id", r.id},
                         {"sdr_db", r.sdr_db ? nlohmann::json(*r.sdr_db) : nlohmann::json()},
                         {"sisdr_db", r.sisdr_db},
                         {"sisdri_db", r.sisdri_db}});
  nlohmann::json fails = nlohmann::json::array();
  for (const auto &[id, msg] : failures) fails.push_back({{"id", id}, {"error", msg}});
  return {{"rows", rows_json},
          {"aggregates",
           {{"sdr_db", sdr ? AggregateJson(*sdr) : nlohmann::json()},
            {"sisdr_db", AggregateJson(sisdr)},
            {"sisdri_db", AggregateJson(sisdri)}}},
          {"failures", fails}};
}

std::string EvalReport::ToCsv() const {
  std::ostringstream out;
  out << "id,sdr_db,sisdr_db,sisdri_db\n";
  char buf[160];
  for (const auto &r : rows) {
    std::string sdr_text;
    if (r.sdr_db) {
      std::snprintf(buf, sizeof(buf), "%.10g", *r.sdr_db);
      sdr_text = buf;
    }
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", r.sisdr_db, r.sisdri_db);
    out << r.id << ',' << sdr_text << ',' << buf << '\n';
  }
  return out.str();
}

void EvalReport::Write(const fs::path &csv, const fs::path &json) const {
  std::ofstream c(csv, std::ios::trunc);
  if (!c) throw IoError("cannot write " + csv.string());
  c << ToCsv();
  std::ofstream j(json, std::ios::trunc);
  if (!j) throw IoError("cannot write " + json.string());
  j << ToJson().dump(2) << '\n';
  if (!c || !j) throw IoError("short write of evaluation report");
}

std::string EvalReport::Summary() const {
  return "SDR=" + (sdr ? Fixed(sdr->mean, 2) : std::string("n/a")) +
         " SiSDR=" + Fixed(sisdr.mean, 2) + " SiSDRi=" + Fixed(sisdri.mean, 2);
}

Estimator ModelEstimator(const Checkpoint &ckpt) {
  return [params = ckpt.params, cfg = ckpt.config](const Example &ex) {
    return tasnet::Extract(ex.mix, ex.enrollment, params, cfg);
  };
}

Estimator OracleEstimator() {
  return [](const Example &ex) { return ex.target; };
}

Estimator MixtureEstimator() {
  return [](const Example &ex) { return ex.mix.Channel(0); };
}

EvalReport Evaluate(const std::vector<datasim::MixtureRecord> &records, const Estimator &est,
                    MetricSet which) {
  EvalReport report;
  for (const auto &rec : records) {
    try {
      Example ex = std::move(LoadExamples({rec}).front());
      Waveform estimate = est(ex);
      if (estimate.size() != ex.target.size())
        throw ShapeError("estimate has " + std::to_string(estimate.size()) +
                         " samples, target has " + std::to_string(ex.target.size()));
      EvalRow row;
      row.id = ex.id;
      const auto &ref = ex.target.samples;
      row.sisdr_db = metrics::SiSdr(ref, estimate.samples);
      row.sisdri_db = metrics::SiSdrImprovement(ref, ex.mix.Channel(0).samples, estimate.samples);
      if (which == MetricSet::kFull) row.sdr_db = metrics::BssSdr(ref, estimate.samples);
      report.rows.push_back(std::move(row));
    } catch (const Error &e) {
      report.failures.emplace_back(rec.Id(), e.what());
    }
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const EvalRow &a, const EvalRow &b) { return a.id < b.id; });
  std::sort(report.failures.begin(), report.failures.end());
  std::vector<double> sdr, sisdr, sisdri;
  for (const auto &r : report.rows) {
    if (r.sdr_db) sdr.push_back(*r.sdr_db);
    sisdr.push_back(r.sisdr_db);
    sisdri.push_back(r.sisdri_db);
  }
  if (which == MetricSet::kFull) report.sdr = Summarize(sdr);
  report.sisdr = Summarize(sisdr);
  report.sisdri = Summarize(sisdri);
  return report;
}

EvalReport Evaluate(const fs::path &manifest, const Checkpoint &ckpt, MetricSet which) {
  return Evaluate(datasim::ReadManifest(manifest), ModelEstimator(ckpt), which);
}

}  // namespace cdtse::pipeline
