// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cli.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "cdtse/checkpoint.h"
#include "cdtse/datasim.h"
#include "cdtse/pipeline.h"
#include "cdtse/run_config.h"
#include "cdtse/tasnet.h"
#include "cdtse/viz.h"

namespace cdtse::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char *kDefaultRunDir = "runs/latest";

// Flags shared by the subcommands that read a run config.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  // Dedicated flags, appended after --set so they take precedence.
  KeyValues flags;

  void Add(CLI::App *cmd) {
    cmd->add_option("--config", config_file, "Config file of 'key = value' lines")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override a config key, e.g. --set train.epochs=5");
  }

  // Registers a flag that stands for one config key.
  void AddKey(CLI::App *cmd, const std::string &flag, const std::string &key,
              const std::string &help) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string &v) { flags.emplace_back(key, v); },
        help + " (config key " + key + ")")
        ->type_name("VALUE");
  }

  RunConfig Resolve() const {
    KeyValues file = config_file.empty() ? KeyValues{} : ReadConfigFile(config_file);
    KeyValues overrides;
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValueError("--set expects KEY=VALUE, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    overrides.insert(overrides.end(), flags.begin(), flags.end());
    RunConfig cfg = ResolveRunConfig(file, overrides);
    if (cfg.run_dir.empty()) {
      const char *env = std::getenv("CDTSE_RUN_DIR");
      cfg.run_dir = env && *env ? env : kDefaultRunDir;
    }
    return cfg;
  }
};

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

Waveform ReadMono(const std::string &path, const char *what) {
  MultichannelMixture m = ReadWav(path);
  if (m.NumChannels() != 1)
    throw ShapeError(std::string(what) + " must be mono, got " +
                     std::to_string(m.NumChannels()) + " channels: " + path);
  return m.Channel(0);
}

int Simulate(ConfigFlags &cf, const std::string &out_dir, std::ostream &out) {
  RunConfig cfg = cf.Resolve();
  cfg.data.Validate();
  datasim::DatasetPaths p = datasim::MakeDataset(cfg.data, out_dir);
  WriteText(fs::path(out_dir) / "simulate.conf", cfg.ToText());
  out << "wrote " << p.train.string() << ", " << p.valid.string() << ", " << p.test.string()
      << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string data_dir, train_manifest, valid_manifest;
  bool resume = false;
  bool quiet = false;
};

int Train(ConfigFlags &cf, const TrainArgs &a, std::ostream &out) {
  RunConfig cfg = cf.Resolve();
  cfg.train.Validate();
  fs::path train = a.train_manifest, valid = a.valid_manifest;
  if (!a.data_dir.empty()) {
    if (train.empty()) train = fs::path(a.data_dir) / "train.jsonl";
    if (valid.empty()) valid = fs::path(a.data_dir) / "valid.jsonl";
  }
  if (train.empty() || valid.empty())
    throw ValueError("train needs --data or both --train-manifest and --valid-manifest");

  const fs::path run_dir = cfg.run_dir;
  fs::create_directories(run_dir);
  WriteText(run_dir / "config.conf", cfg.ToText());

  pipeline::TrainOptions opts;
  opts.run_dir = run_dir;
  opts.resume = a.resume;
  if (!a.quiet)
    opts.on_epoch = [&out](const pipeline::EpochLog &e) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch %d train_loss=%.4f valid_sisdr=%.3f lr=%.3g\n",
                    e.epoch, e.train_loss, e.valid_sisdr, e.lr);
      out << buf << std::flush;
    };
  pipeline::TrainResult r = pipeline::Train(train, valid, cfg.train, opts);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "best epoch %d valid_sisdr=%.3f%s\n", r.best.epoch,
                r.best.valid_sisdr, r.early_stopped ? " (early stop)" : "");
  out << buf << "checkpoint: " << (run_dir / "best.ckpt").string() << '\n';
  return kExitOk;
}

struct ExtractArgs {
  std::string checkpoint, mixture, enrollment, output, manifest, out_dir;
};

int Extract(const ExtractArgs &a, std::ostream &out, std::ostream &err) {
  const bool single = !a.mixture.empty() || !a.enrollment.empty() || !a.output.empty();
  const bool batch = !a.manifest.empty() || !a.out_dir.empty();
  if (single == batch)
    throw ValueError(
        "extract needs either --mixture, --enrollment and --output, or --manifest and --out-dir");
  if (single && (a.mixture.empty() || a.enrollment.empty() || a.output.empty()))
    throw ValueError("single-file extract needs --mixture, --enrollment and --output");
  if (batch && (a.manifest.empty() || a.out_dir.empty()))
    throw ValueError("batch extract needs --manifest and --out-dir");

  Checkpoint ckpt = LoadCheckpoint(a.checkpoint);
  if (single) {
    MultichannelMixture mix = ReadWav(a.mixture);
    Waveform est = tasnet::Extract(mix, ReadMono(a.enrollment, "enrollment"), ckpt.params,
                                   ckpt.config);
    WriteWav(a.output, est);
    out << "wrote " << a.output << '\n';
    return kExitOk;
  }

  fs::create_directories(a.out_dir);
  int failures = 0, written = 0;
  for (const auto &r : datasim::ReadManifest(a.manifest)) {
    try {
      MultichannelMixture mix = ReadWav(r.mixture_path);
      Waveform est = tasnet::Extract(mix, ReadMono(r.enrollment_path, "enrollment"),
                                     ckpt.params, ckpt.config);
      WriteWav((fs::path(a.out_dir) / (r.Id() + ".wav")).string(), est);
      ++written;
    } catch (const Error &e) {
      err << r.Id() << ": " << e.what() << '\n';
      ++failures;
    }
  }
  out << "wrote " << written << " estimates to " << a.out_dir << '\n';
  return failures ? kExitFailure : kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint, manifest, out_dir;
  std::string metric = "full";
  std::string estimator = "model";
};

int Evaluate(const EvaluateArgs &a, std::ostream &out, std::ostream &err) {
  pipeline::Estimator est;
  if (a.estimator == "model") {
    if (a.checkpoint.empty()) throw ValueError("--checkpoint is required with --estimator model");
    est = pipeline::ModelEstimator(LoadCheckpoint(a.checkpoint));
  } else if (a.estimator == "oracle") {
    est = pipeline::OracleEstimator();
  } else {
    est = pipeline::MixtureEstimator();
  }
  fs::path dir = a.out_dir;
  if (dir.empty()) {
    if (!a.checkpoint.empty()) {
      dir = fs::path(a.checkpoint).parent_path();
    } else {
      const char *env = std::getenv("CDTSE_RUN_DIR");
      dir = env && *env ? env : kDefaultRunDir;
    }
  }
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  const auto metrics =
      a.metric == "sisdr-only" ? pipeline::MetricSet::kSiSdrOnly : pipeline::MetricSet::kFull;
  pipeline::EvalReport rep = pipeline::Evaluate(datasim::ReadManifest(a.manifest), est, metrics);
  rep.Write(dir / "report.csv", dir / "report.json");
  out << rep.Summary() << '\n';
  for (const auto &[id, msg] : rep.failures) err << id << ": " << msg << '\n';
  if (!rep.failures.empty()) {
    err << rep.failures.size() << " record(s) failed\n";
    return kExitFailure;
  }
  return kExitOk;
}

struct VisualizeArgs {
  std::string checkpoint, mixture, out_dir;
  bool same_encoding = false;
};

int Visualize(const VisualizeArgs &a, std::ostream &out) {
  Checkpoint ckpt = LoadCheckpoint(a.checkpoint);
  viz::CdViews views = viz::ComputeCdViews(ckpt, ReadWav(a.mixture), a.same_encoding);
  for (const auto &p : viz::WriteCdViews(views, a.out_dir)) out << "wrote " << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multi-channel target speech extraction toolkit", "cdtse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // simulate
  ConfigFlags sim_cf;
  std::string sim_out;
  CLI::App *sim = app.add_subcommand("simulate", "Generate a synthetic two-channel corpus");
  sim->add_option("--out", sim_out, "Output directory for manifests and audio")->required();
  sim_cf.Add(sim);
  sim_cf.AddKey(sim, "--n-train", "data.n_train", "Training mixtures");
  sim_cf.AddKey(sim, "--n-valid", "data.n_valid", "Validation mixtures");
  sim_cf.AddKey(sim, "--n-test", "data.n_test", "Test mixtures");
  sim_cf.AddKey(sim, "--seed", "data.seed", "Dataset seed");
  sim_cf.AddKey(sim, "--num-speakers", "data.num_speakers", "Speaker inventory size");
  sim_cf.AddKey(sim, "--duration", "data.duration_s", "Mixture length in seconds");
  sim_cf.AddKey(sim, "--kind", "data.kind", "Source kind: tonal-chirp or filtered-noise");

  // train
  ConfigFlags train_cf;
  TrainArgs train_args;
  CLI::App *train = app.add_subcommand("train", "Train a model and write checkpoints");
  train_cf.Add(train);
  train->add_option("--data", train_args.data_dir,
                    "Directory holding train.jsonl and valid.jsonl");
  train->add_option("--train-manifest", train_args.train_manifest, "Training manifest");
  train->add_option("--valid-manifest", train_args.valid_manifest, "Validation manifest");
  train_cf.AddKey(train, "--run-dir", "run_dir",
                  "Run directory (default: $CDTSE_RUN_DIR, else runs/latest)");
  train_cf.AddKey(train, "--preset", "preset", "Model preset: default, toy or micro");
  train_cf.AddKey(train, "--spatial-mode", "model.spatial_mode",
                  "One of: " + SpatialModeList());
  train_cf.AddKey(train, "--epochs", "train.epochs", "Maximum epochs");
  train_cf.AddKey(train, "--batch-size", "train.batch_size", "Segments per batch");
  train_cf.AddKey(train, "--learning-rate", "train.learning_rate", "Initial learning rate");
  train_cf.AddKey(train, "--seed", "train.seed", "Training seed");
  train->add_flag("--resume", train_args.resume, "Continue from <run-dir>/last.ckpt");
  train->add_flag("--quiet", train_args.quiet, "Do not print per-epoch lines");

  // extract
  ExtractArgs ex;
  CLI::App *extract = app.add_subcommand("extract", "Extract the enrolled speaker");
  extract->add_option("--checkpoint", ex.checkpoint, "Model checkpoint")->required();
  extract->add_option("--mixture", ex.mixture, "Mixture WAV (single-file mode)");
  extract->add_option("--enrollment", ex.enrollment, "Mono enrollment WAV (single-file mode)");
  extract->add_option("--output", ex.output, "Estimate WAV (single-file mode)");
  extract->add_option("--manifest", ex.manifest, "Manifest to process (batch mode)");
  extract->add_option("--out-dir", ex.out_dir, "Receives <id>.wav per record (batch mode)");

  // evaluate
  EvaluateArgs ev;
  CLI::App *evaluate = app.add_subcommand("evaluate", "Score estimates against references");
  evaluate->add_option("--manifest", ev.manifest, "Test manifest")->required();
  evaluate->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  evaluate->add_option("--out-dir", ev.out_dir,
                       "Receives report.csv and report.json (default: checkpoint directory)");
  evaluate->add_option("--metric", ev.metric, "full, or sisdr-only to skip BSS SDR")
      ->check(CLI::IsMember({"full", "sisdr-only"}));
  evaluate
      ->add_option("--estimator", ev.estimator,
                   "model; or the oracle (target) and mixture (channel 0) anchors")
      ->check(CLI::IsMember({"model", "oracle", "mixture"}));

  // visualize
  VisualizeArgs vz;
  CLI::App *visualize =
      app.add_subcommand("visualize", "Dump W1, W2, Wcd heatmaps and the score vector");
  visualize->add_option("--checkpoint", vz.checkpoint, "cd or cd+adapt checkpoint")->required();
  visualize->add_option("--mixture", vz.mixture, "Two-channel mixture WAV")->required();
  visualize->add_option("--out-dir", vz.out_dir, "Output directory")->required();
  visualize->add_flag("--probe-same-encoding", vz.same_encoding,
                      "Use W1 as the second encoding (every score becomes 1/2)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return Simulate(sim_cf, sim_out, out);
    if (train->parsed()) return Train(train_cf, train_args, out);
    if (extract->parsed()) return Extract(ex, out, err);
    if (evaluate->parsed()) return Evaluate(ev, out, err);
    if (visualize->parsed()) return Visualize(vz, out);
  } catch (const ValueError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cdtse::cli
