// Copyright 2026 The avse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// avse: synthesize data, train, enhance, evaluate, run the ablation sweep and
// export spectrograms. Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "avse/checkpoint.hpp"
#include "avse/error.hpp"
#include "avse/file_io.hpp"
#include "avse/manifest.hpp"
#include "avse/metrics.hpp"
#include "avse/pipeline.hpp"
#include "avse/trainer.hpp"
#include "avse/wav.hpp"

namespace fs = std::filesystem;
using namespace avse;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::uint64_t seed_from(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  return resolve_seed(flag, std::getenv("AVSE_SEED"), fallback);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

fs::path sibling_manifest(const fs::path& out) {
  return fs::path(out.string() + ".manifest.json");
}

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  std::size_t count = 4;
  std::vector<double> snr_db;
  std::vector<double> snr_range;
  double duration = 1.0;
  std::string noise = "white";
  fs::path out;
};

int cmd_synth(const SynthArgs& a) {
  Stopwatch clock;
  SynthOptions o;
  o.seed = seed_from(a.seed, 0);
  o.count = a.count;
  o.snr_db = a.snr_db;
  if (!a.snr_range.empty()) {
    o.snr_min_db = a.snr_range[0];
    o.snr_max_db = a.snr_range[1];
  }
  o.duration_s = a.duration;
  o.noise = parse_noise(a.noise);
  const auto written = write_synthetic_dataset(a.out, o);
  RunManifest m;
  m.command = "synth";
  m.config = {{"count", o.count},       {"snr_db", o.snr_db},
              {"snr_range_db", {o.snr_min_db, o.snr_max_db}},
              {"duration_s", o.duration_s}, {"noise", a.noise}};
  m.seed = o.seed;
  m.outputs = written;
  m.wall_clock_s = clock.seconds();
  write_manifest(a.out / "manifest.json", m);
  std::printf("wrote %zu utterances to %s\n", o.count, a.out.string().c_str());
  return 0;
}

struct TrainArgs {
  fs::path data;
  fs::path config;
  fs::path out;
  fs::path resume;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  Stopwatch clock;
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const std::uint64_t seed = seed_from(a.seed, rc.train.seed);
  rc.train.seed = seed;
  const DatasetIndex index = read_dataset_index(a.data);
  const auto items = load_dataset(index);
  const Dataset data = split_dataset(items, rc.validation_fraction);

  std::unique_ptr<AvcrnModel> model;
  TrainingState state;
  if (!a.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.resume);
    model = std::move(ck.model);
    state = ck.state;
    rc.model = model->config();
  } else {
    if (rc.train.normalize) rc.model = fit_normalization(rc.model, data.train);
    model = std::make_unique<AvcrnModel>(rc.model, seed);
  }
  std::printf("training %zu utterances (%zu validation), %zu parameters, epochs %llu..%zu\n",
              data.train.size(), data.validation.size(), model->parameter_count(),
              static_cast<unsigned long long>(state.epoch), rc.train.max_epochs);
  std::uint64_t shown = ~0ULL;
  const TrainResult r = train(*model, state, data, rc.train, [&](const LossRecord& rec) {
    if (rec.epoch != shown) {
      shown = rec.epoch;
      std::printf("epoch %llu  step %llu  train %.6g  val %.6g\n",
                  static_cast<unsigned long long>(rec.epoch),
                  static_cast<unsigned long long>(rec.step), rec.train_loss, rec.val_loss);
      std::fflush(stdout);
    }
  });

  fs::create_directories(a.out);
  std::vector<fs::path> outputs;
  if (!r.best_checkpoint.empty()) {
    write_file_bytes(a.out / "best.ckpt", r.best_checkpoint);
    outputs.push_back(a.out / "best.ckpt");
  }
  save_checkpoint(a.out / "last.ckpt", *model, r.final_state);
  outputs.push_back(a.out / "last.ckpt");
  std::ofstream csv(a.out / "loss.csv");
  write_history_csv(csv, r.history);
  csv.close();
  outputs.push_back(a.out / "loss.csv");

  RunManifest m;
  m.command = "train";
  m.config = rc.to_json();
  m.seed = seed;
  m.inputs.push_back(index.root / kIndexFile);
  if (!a.config.empty()) m.inputs.push_back(a.config);
  if (!a.resume.empty()) m.inputs.push_back(a.resume);
  m.outputs = outputs;
  m.wall_clock_s = clock.seconds();
  write_manifest(a.out / "manifest.json", m);
  if (r.history.empty()) {
    std::printf("nothing to do: checkpoint is already at epoch %llu\n",
                static_cast<unsigned long long>(state.epoch));
  } else {
    std::printf("best val %.6g at epoch %llu\n", r.best_val_loss,
                static_cast<unsigned long long>(r.best_epoch));
  }
  return 0;
}

struct EnhanceArgs {
  fs::path ckpt;
  fs::path wav;
  fs::path video;
  fs::path out;
  fs::path mel_csv;
  bool zero_video = false;
};

int cmd_enhance(const EnhanceArgs& a) {
  Stopwatch clock;
  LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const Waveform mixture = read_wav(a.wav);
  std::vector<VideoSegment> video;
  if (!a.video.empty()) video = load_segments(a.video);
  const Enhanced e = enhance(*ck.model, mixture, video, a.zero_video);
  write_wav(a.out, e.waveform);
  RunManifest m;
  m.command = "enhance";
  m.config = {{"model", ck.model->config().to_json()}, {"zero_video", a.zero_video}};
  m.inputs = {a.ckpt, a.wav};
  if (!a.video.empty()) m.inputs.push_back(a.video);
  m.outputs = {a.out};
  if (!a.mel_csv.empty()) {
    std::ofstream csv(a.mel_csv);
    if (!csv) throw FormatError("cannot write " + a.mel_csv.string());
    write_matrix_csv(csv, e.log_mel);
    csv.close();
    m.outputs.push_back(a.mel_csv);
  }
  m.wall_clock_s = clock.seconds();
  write_manifest(sibling_manifest(a.out), m);
  std::printf("enhanced %.3f s -> %s (%.3f s)\n", mixture.duration_s(), a.out.string().c_str(),
              e.waveform.duration_s());
  return 0;
}

std::vector<LoadedUtterance> filter_snr(std::vector<LoadedUtterance> items,
                                        const std::vector<double>& snrs) {
  if (snrs.empty()) return items;
  std::vector<LoadedUtterance> kept;
  for (auto& u : items) {
    for (double s : snrs) {
      if (std::abs(u.entry.snr_db - s) < 1e-9) {
        kept.push_back(std::move(u));
        break;
      }
    }
  }
  if (kept.empty()) throw FormatError("evaluate: no utterances at the requested SNRs");
  return kept;
}

void write_report(const fs::path& dir, const EvalReport& report, std::vector<fs::path>& outputs) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "report.csv");
  write_report_csv(csv, report);
  csv.close();
  const std::string table = format_report_table(report);
  write_text(dir / "report.txt", table);
  outputs.push_back(dir / "report.csv");
  outputs.push_back(dir / "report.txt");
  std::fputs(table.c_str(), stdout);
}

struct EvaluateArgs {
  std::vector<fs::path> ckpts;
  fs::path data;
  fs::path out;
  std::vector<double> snr_db;
};

int cmd_evaluate(const EvaluateArgs& a) {
  Stopwatch clock;
  const DatasetIndex index = read_dataset_index(a.data);
  const auto items = filter_snr(load_dataset(index), a.snr_db);
  std::vector<EvalRun> runs = evaluate_unprocessed(items);
  RunManifest m;
  m.command = "evaluate";
  m.config = {{"snr_db", a.snr_db}, {"variants", nlohmann::json::array()}};
  m.inputs.push_back(index.root / kIndexFile);
  for (std::size_t i = 0; i < a.ckpts.size(); ++i) {
    std::string name = a.ckpts[i].stem().string();
    for (std::size_t j = 0; j < i; ++j) {
      if (a.ckpts[j].stem() == a.ckpts[i].stem()) name += "_" + std::to_string(i);
    }
    LoadedCheckpoint ck = load_checkpoint(a.ckpts[i]);
    const auto scored = evaluate_model(*ck.model, name, items);
    runs.insert(runs.end(), scored.begin(), scored.end());
    m.config["variants"].push_back(name);
    m.inputs.push_back(a.ckpts[i]);
  }
  write_report(a.out, build_report(runs), m.outputs);
  m.wall_clock_s = clock.seconds();
  write_manifest(a.out / "manifest.json", m);
  return 0;
}

struct AblateArgs {
  fs::path data;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

int cmd_ablate(const AblateArgs& a) {
  Stopwatch clock;
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const std::uint64_t seed = seed_from(a.seed, rc.train.seed);
  rc.train.seed = seed;
  const DatasetIndex index = read_dataset_index(a.data);
  const auto items = load_dataset(index);
  const AblationResult r = run_ablation(items, rc, seed);

  RunManifest m;
  m.command = "ablate";
  m.config = rc.to_json();
  m.seed = seed;
  m.inputs.push_back(index.root / kIndexFile);
  if (!a.config.empty()) m.inputs.push_back(a.config);
  fs::create_directories(a.out);
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& v : r.variants) {
    const auto ckpt = a.out / (v.name + ".ckpt");
    write_file_bytes(ckpt, v.checkpoint);
    m.outputs.push_back(ckpt);
    counts[v.name] = v.parameter_count;
    std::printf("%-14s %8zu parameters, final train loss %.6g\n", v.name.c_str(),
                v.parameter_count, v.history.empty() ? 0.0 : v.history.back().train_loss);
  }
  m.config["parameter_counts"] = counts;
  write_report(a.out, r.report, m.outputs);
  m.wall_clock_s = clock.seconds();
  write_manifest(a.out / "manifest.json", m);
  return 0;
}

struct SpectrogramArgs {
  fs::path wav;
  fs::path out;
};

int cmd_spectrogram(const SpectrogramArgs& a) {
  Stopwatch clock;
  const Matrix lm = log_mel(read_wav(a.wav));
  if (lm.cols == 0) throw DimensionError("spectrogram: input shorter than one frame");
  const fs::path csv_path = a.out.string() + ".csv", pgm_path = a.out.string() + ".pgm";
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  {
    std::ofstream csv(csv_path);
    if (!csv) throw FormatError("cannot write " + csv_path.string());
    write_matrix_csv(csv, lm);
    std::ofstream pgm(pgm_path, std::ios::binary);
    if (!pgm) throw FormatError("cannot write " + pgm_path.string());
    write_pgm(pgm, lm);
  }
  RunManifest m;
  m.command = "spectrogram";
  m.config = {{"rows", lm.rows}, {"cols", lm.cols}};
  m.inputs = {a.wav};
  m.outputs = {csv_path, pgm_path};
  m.wall_clock_s = clock.seconds();
  write_manifest(sibling_manifest(a.out), m);
  std::printf("%zu x %zu log-Mel -> %s, %s\n", lm.rows, lm.cols, csv_path.string().c_str(),
              pgm_path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual speech enhancement toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic audio-video dataset");
  s->add_option("--seed", synth.seed, "Base seed (falls back to AVSE_SEED, then 0)");
  s->add_option("--count", synth.count, "Number of utterances")->check(CLI::PositiveNumber);
  s->add_option("--snr-db", synth.snr_db, "SNRs cycled over utterances")->delimiter(',');
  s->add_option("--snr-range", synth.snr_range, "Uniform SNR range when --snr-db is absent")
      ->expected(2);
  s->add_option("--duration", synth.duration, "Seconds per utterance");
  s->add_option("--noise", synth.noise, "white or babble")
      ->check(CLI::IsMember({"white", "babble"}));
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--data", tr.data, "Dataset directory or index")->required();
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_option("--seed", tr.seed, "Seed (falls back to AVSE_SEED, then the config)");

  EnhanceArgs en;
  auto* e = app.add_subcommand("enhance", "Enhance one mixture");
  e->add_option("--ckpt", en.ckpt, "Checkpoint")->required();
  e->add_option("--wav", en.wav, "Mixture WAV (16 kHz mono)")->required();
  e->add_option("--video", en.video, "Video segments (AVSG1)");
  e->add_option("--out", en.out, "Enhanced WAV")->required();
  e->add_option("--mel-csv", en.mel_csv, "Also write the predicted log-Mel as CSV");
  e->add_flag("--zero-video", en.zero_video, "Feed black frames when no video is given");

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Score checkpoints against unprocessed mixtures");
  v->add_option("--ckpt", ev.ckpts, "Checkpoints (repeatable)")->required();
  v->add_option("--data", ev.data, "Evaluation dataset")->required();
  v->add_option("--out", ev.out, "Output directory")->required();
  v->add_option("--snr-db", ev.snr_db, "Keep only these SNRs")->delimiter(',');

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train and score the four ablation variants");
  a->add_option("--data", ab.data, "Dataset directory or index")->required();
  a->add_option("--config", ab.config, "Run config JSON");
  a->add_option("--out", ab.out, "Output directory")->required();
  a->add_option("--seed", ab.seed, "Seed (falls back to AVSE_SEED, then the config)");

  SpectrogramArgs sp;
  auto* g = app.add_subcommand("spectrogram", "Export a log-Mel spectrogram as CSV and PGM");
  g->add_option("--wav", sp.wav, "Input WAV")->required();
  g->add_option("--out", sp.out, "Output prefix (.csv and .pgm are appended)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_enhance(en);
    if (v->parsed()) return cmd_evaluate(ev);
    if (a->parsed()) return cmd_ablate(ab);
    if (g->parsed()) return cmd_spectrogram(sp);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const ContractError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const NumericError& err) {
    std::fprintf(stderr, "numeric failure: %s\n", err.what());
    return kExitNumeric;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  } catch (const fs::filesystem_error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  }
  return kExitUsage;
}
