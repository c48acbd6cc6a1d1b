// tools/adlmvdr.cc
//
// Command-line front end: simulate, train, infer, eval.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include "CLI11.hpp"

#include "adlmvdr/base/error.h"
#include "adlmvdr/beamformer/beamformer.h"
#include "adlmvdr/metrics/report.h"
#include "adlmvdr/signal/wav.h"
#include "adlmvdr/train/trainer.h"

namespace fs = std::filesystem;
using namespace adlmvdr;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json ConfigOrEmpty(const std::string &path) {
  return path.empty() ? nlohmann::json::object() : LoadConfigTree(path);
}

void WriteMono(const fs::path &path, const std::vector<double> &x) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  MultiWave w(1, x.size());
  w.channels[0] = x;
  WriteWav(path.string(), w);
}

struct SimulateArgs {
  std::string config, out;
  std::optional<uint64_t> seed;
  std::optional<size_t> num_scenes, jobs;
};

int RunSimulate(const SimulateArgs &a) {
  const nlohmann::json tree = ConfigOrEmpty(a.config);
  TrainConfigFromJson(tree);  // rejects unknown keys in the other tables too
  DatasetSpec spec = DatasetSpecFromJson(tree);
  if (a.seed) spec.seed = *a.seed;
  if (a.num_scenes) spec.num_scenes = *a.num_scenes;
  if (a.jobs) spec.jobs = *a.jobs;
  spec.Validate();
  const auto entries = GenerateDataset(spec, a.out);
  fmt::print("wrote {} scenes and {}\n", entries.size(), (fs::path(a.out) / "manifest.jsonl").string());
  return 0;
}

struct TrainArgs {
  std::string config, out, train_manifest, valid_manifest;
  std::optional<uint64_t> seed;
  std::optional<size_t> max_steps;
  bool quiet = false;
};

int RunTrain(const TrainArgs &a) {
  TrainConfig cfg = TrainConfigFromJson(LoadConfigTree(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  if (!a.train_manifest.empty()) cfg.train_manifest = a.train_manifest;
  if (!a.valid_manifest.empty()) cfg.valid_manifest = a.valid_manifest;
  if (cfg.train_manifest.empty())
    throw UsageError("no training manifest: set train.train_manifest or pass --train-manifest");
  const auto train = LoadUtterances(cfg.train_manifest, cfg.model.num_mics);
  std::vector<Utterance> valid;
  if (!cfg.valid_manifest.empty()) valid = LoadUtterances(cfg.valid_manifest, cfg.model.num_mics);
  TrainOptions opt;
  opt.out_dir = a.out;
  opt.quiet = a.quiet;
  const TrainSummary s = Train(cfg, train, valid, opt);
  const auto &c = s.counters;
  fmt::print("{}: {} steps, {} epochs, best validation Si-SNR {:.2f} dB (epoch {})\n",
             VariantName(cfg.model.variant), s.steps, s.epochs, s.best_valid_si_snr, s.best_epoch);
  fmt::print("instability: nan_losses {} nan_gradients {} forward_errors {} loading_floor_hits {} "
             "floored_denominators {}\n",
             c.nan_losses, c.nan_gradients, c.forward_errors, c.graph.loading_floor_hits,
             c.graph.floored_denominators);
  fmt::print("checkpoints in {}\n", a.out);
  return 0;
}

struct InferArgs {
  std::string checkpoint, manifest, input, out;
  std::optional<double> doa_deg;
  bool oracle = false;
};

int RunInfer(const InferArgs &a) {
  if (a.oracle) {
    if (a.manifest.empty()) throw UsageError("--oracle needs --manifest (it reads the target images)");
    const fs::path dir = fs::path(a.manifest).parent_path();
    size_t n = 0;
    for (const auto &e : ReadManifest(a.manifest)) {
      const MultiWave mix = ReadWav((dir / e.mixture).string());
      const MultiWave tgt = ReadWav((dir / e.reference).string());
      WriteMono(fs::path(a.out) / (e.id + ".wav"), OracleMvdr(mix, tgt, StftConfig{}));
      ++n;
    }
    fmt::print("oracle MVDR: wrote {} files to {}\n", n, a.out);
    return 0;
  }
  if (a.checkpoint.empty()) throw UsageError("infer needs --checkpoint (or --oracle)");
  if (a.manifest.empty() == a.input.empty())
    throw UsageError("infer needs exactly one of --manifest or --input");
  const System sys = LoadSystem(a.checkpoint);
  const size_t m_n = sys.config().num_mics;
  if (!a.input.empty()) {
    const MultiWave mix = ReadWav(a.input);
    if (mix.NumChannels() != m_n)
      throw Error(fmt::format("{} has {} channels, checkpoint expects {}", a.input,
                              mix.NumChannels(), m_n));
    if (!a.doa_deg && sys.config().features.use_df)
      throw Error("this checkpoint uses the direction feature; pass --doa (degrees)");
    const double doa = a.doa_deg ? *a.doa_deg * std::numbers::pi / 180.0 : 0.0;
    WriteMono(a.out, sys.Enhance(mix, doa));
    fmt::print("wrote {}\n", a.out);
    return 0;
  }
  const auto utts = LoadUtterances(a.manifest, m_n);
  for (const auto &u : utts) WriteMono(fs::path(a.out) / (u.id + ".wav"), sys.Enhance(u.mixture, u.doa));
  fmt::print("wrote {} files to {}\n", utts.size(), a.out);
  return 0;
}

struct EvalArgs {
  std::string manifest, enhanced, out, system = "enhanced";
  size_t filter_len = 512;
};

int RunEval(const EvalArgs &a) {
  EvalReport r = EvaluateSet(a.manifest, a.enhanced, a.filter_len);
  r.system = a.system;
  fmt::print("{}", FormatTable(r));
  if (!r.skipped.empty()) fmt::print("skipped: {}\n", fmt::join(r.skipped, ", "));
  if (!a.out.empty()) {
    std::ofstream o(a.out);
    if (!o) throw Error("cannot write " + a.out);
    o << ReportToJson(r) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-channel speech enhancement with MVDR and ADL-MVDR beamformers"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SimulateArgs sa;
  auto *sim = app.add_subcommand("simulate", "Render synthetic array scenes and a manifest");
  sim->add_option("--config", sa.config, "TOML/JSON config; the [simulate] table is read")
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sa.out, "Output directory")->required();
  sim->add_option("--seed", sa.seed, "Override simulate.seed");
  sim->add_option("--num-scenes", sa.num_scenes, "Override simulate.num_scenes");
  sim->add_option("--jobs", sa.jobs, "Worker threads (output does not depend on it)");

  TrainArgs ta;
  auto *tr = app.add_subcommand("train", "Train a system; writes checkpoints and a JSON-lines log");
  tr->add_option("--config", ta.config, "TOML/JSON config")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", ta.out, "Run directory")->required();
  tr->add_option("--seed", ta.seed, "Override train.seed");
  tr->add_option("--max-steps", ta.max_steps, "Override train.max_steps");
  tr->add_option("--train-manifest", ta.train_manifest, "Override train.train_manifest");
  tr->add_option("--valid-manifest", ta.valid_manifest, "Override train.valid_manifest");
  tr->add_flag("--quiet", ta.quiet, "No progress output");

  InferArgs ia;
  auto *inf = app.add_subcommand("infer", "Enhance mixtures with a checkpoint or the oracle MVDR");
  inf->add_option("--checkpoint", ia.checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  inf->add_option("--manifest", ia.manifest, "Enhance every scene of a manifest")
      ->check(CLI::ExistingFile);
  inf->add_option("--input", ia.input, "Single M-channel mixture WAV")->check(CLI::ExistingFile);
  inf->add_option("--doa", ia.doa_deg, "Target direction in degrees (with --input)");
  inf->add_option("--out", ia.out, "Output WAV (--input) or directory (--manifest)")->required();
  inf->add_flag("--oracle", ia.oracle, "MVDR from ground-truth images instead of a checkpoint");

  EvalArgs ea;
  auto *ev = app.add_subcommand("eval", "Score enhanced WAVs against a manifest");
  ev->add_option("--manifest", ea.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--enhanced", ea.enhanced, "Directory of <id>.wav outputs")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", ea.out, "Write the JSON report here");
  ev->add_option("--system", ea.system, "Row label in the table");
  ev->add_option("--filter-len", ea.filter_len, "Projection SDR filter taps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return RunSimulate(sa);
    if (*tr) return RunTrain(ta);
    if (*inf) return RunInfer(ia);
    if (*ev) return RunEval(ea);
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
