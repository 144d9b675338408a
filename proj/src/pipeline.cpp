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

#include "avse/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "avse/checkpoint.hpp"
#include "avse/error.hpp"
#include "avse/wav.hpp"

namespace avse {

using nlohmann::json;

std::uint64_t utterance_seed(std::uint64_t base, std::size_t i) {
  // splitmix64 finalizer over base and index.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::filesystem::path> write_synthetic_dataset(const std::filesystem::path& dir,
                                                           const SynthOptions& options) {
  if (options.count == 0) throw ConfigError("synth.count: must be > 0");
  if (!(options.snr_min_db <= options.snr_max_db)) {
    throw ConfigError("synth.snr_range_db: empty range");
  }
  std::filesystem::create_directories(dir);
  std::mt19937_64 snr_rng(options.seed);
  std::uniform_real_distribution<double> snr_draw(options.snr_min_db, options.snr_max_db);
  std::vector<std::filesystem::path> written;
  json entries = json::array();
  for (std::size_t i = 0; i < options.count; ++i) {
    const double snr = options.snr_db.empty() ? snr_draw(snr_rng)
                                              : options.snr_db[i % options.snr_db.size()];
    const std::uint64_t seed = utterance_seed(options.seed, i);
    const SyntheticUtterance u = synth_utterance(seed, options.duration_s, snr, options.noise);
    char id[32];
    std::snprintf(id, sizeof id, "utt%04zu", i);
    DatasetEntry e{id, std::string(id) + "_clean.wav", std::string(id) + "_mix.wav",
                   std::string(id) + ".avsg", snr, noise_name(options.noise), seed};
    write_wav(dir / e.clean, u.clean);
    write_wav(dir / e.mixture, u.mixture);
    save_segments(dir / e.video, u.video);
    written.push_back(dir / e.clean);
    written.push_back(dir / e.mixture);
    written.push_back(dir / e.video);
    entries.push_back({{"id", e.id},         {"clean", e.clean}, {"mixture", e.mixture},
                       {"video", e.video},   {"snr_db", e.snr_db}, {"noise", e.noise},
                       {"seed", e.seed}});
  }
  const auto index_path = dir / kIndexFile;
  std::ofstream out(index_path);
  if (!out) throw FormatError("cannot write " + index_path.string());
  out << json{{"sample_rate", kSampleRate}, {"utterances", entries}}.dump(2) << '\n';
  written.push_back(index_path);
  return written;
}

DatasetIndex read_dataset_index(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / kIndexFile : path;
  std::ifstream in(file);
  if (!in) throw FormatError("dataset index not found: " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("dataset index " + file.string() + ": " + e.what());
  }
  DatasetIndex index;
  index.root = file.parent_path();
  try {
    if (j.at("sample_rate").get<int>() != kSampleRate) {
      throw FormatError("dataset index " + file.string() + ": sample_rate must be 16000");
    }
    for (const auto& u : j.at("utterances")) {
      DatasetEntry e;
      e.id = u.at("id").get<std::string>();
      e.clean = u.at("clean").get<std::string>();
      e.mixture = u.at("mixture").get<std::string>();
      e.video = u.at("video").get<std::string>();
      e.snr_db = u.at("snr_db").get<double>();
      e.noise = u.at("noise").get<std::string>();
      e.seed = u.value("seed", std::uint64_t{0});
      for (const auto* name : {&e.clean, &e.mixture, &e.video}) {
        if (!std::filesystem::exists(index.root / *name)) {
          throw FormatError("dataset index " + file.string() + ": " + e.id + " references missing file " +
                            *name);
        }
      }
      index.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("dataset index " + file.string() + ": " + e.what());
  }
  if (index.entries.empty()) throw FormatError("dataset index " + file.string() + ": no utterances");
  return index;
}

std::vector<LoadedUtterance> load_dataset(const DatasetIndex& index) {
  std::vector<LoadedUtterance> out;
  out.reserve(index.entries.size());
  for (const auto& e : index.entries) {
    LoadedUtterance u{e, read_wav(index.root / e.clean), read_wav(index.root / e.mixture),
                      load_segments(index.root / e.video)};
    out.push_back(std::move(u));
  }
  return out;
}

Utterance to_examples(const LoadedUtterance& u) {
  return make_examples(u.entry.id, u.clean, u.mixture, u.video, u.entry.snr_db);
}

Dataset split_dataset(const std::vector<LoadedUtterance>& items, double validation_fraction) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction: must lie in [0, 1)");
  }
  const auto n = items.size();
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, n == 0 ? 0 : n - 1);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_val ? d.train : d.validation).push_back(to_examples(items[i]));
  }
  return d;
}

json RunConfig::to_json() const {
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"validation_fraction", validation_fraction}};
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "preset" && key != "model" && key != "train" && key != "validation_fraction") {
      throw ConfigError(key + ": unknown field");
    }
  }
  RunConfig c;
  const std::string preset = j.value("preset", std::string("default"));
  if (preset != "default" && preset != "tiny") {
    throw ConfigError("preset: expected \"default\" or \"tiny\", got \"" + preset + "\"");
  }
  json model = preset == "tiny" ? ModelConfig::tiny().to_json() : ModelConfig().to_json();
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (!m.is_object()) throw ConfigError("model: expected a JSON object");
    if (m.contains("audio_channels") && !m.contains("fusion_channels")) model.erase("fusion_channels");
    for (const auto& [key, value] : m.items()) model[key] = value;
  }
  c.model = ModelConfig::from_json(model);
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("validation_fraction")) {
    if (!j.at("validation_fraction").is_number()) {
      throw ConfigError("validation_fraction: expected a number");
    }
    c.validation_fraction = j.at("validation_fraction").get<double>();
    if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction: must lie in [0, 1)");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env_value,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (env_value == nullptr || *env_value == '\0') return fallback;
  const std::string s(env_value);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("AVSE_SEED: expected a non-negative integer, got \"" + s + "\"");
  }
  return v;
}

Enhanced enhance(AvcrnModel& model, const Waveform& mixture,
                 const std::vector<VideoSegment>& video, bool zero_video) {
  const bool uses_video = !model.config().disable_video;
  if (uses_video && video.empty() && !zero_video) {
    throw ContractError(
        "enhance: the model was trained with video; supply video segments or allow zero video");
  }
  const ComplexSpectrogram spec = stft(mixture);
  if (spec.frames == 0) throw DimensionError("enhance: mixture shorter than one frame");
  const auto chunks = chunk(log_mel(spec));
  const std::size_t k = chunks.size();
  const std::size_t plane = kMelBands * kChunkFrames;
  const std::size_t vplane = kVideoFrames * kVideoSize * kVideoSize;
  std::vector<double> mix(k * plane, 0.0), vid(k * vplane, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    std::copy(chunks[i].matrix.data.begin(), chunks[i].matrix.data.end(), mix.begin() + i * plane);
    if (!video.empty()) {
      const auto& seg = video[std::min(i, video.size() - 1)];
      std::copy(seg.pixels.begin(), seg.pixels.end(), vid.begin() + i * vplane);
    }
  }
  Tensor out;
  {
    NoGradGuard guard;
    out = model.forward(Tensor::from({k, 1, kMelBands, kChunkFrames}, std::move(mix)),
                        Tensor::from({k, kVideoFrames, kVideoSize, kVideoSize}, std::move(vid)),
                        BatchNormMode::kEval);
  }
  std::vector<LogMelChunk> predicted(k);
  const auto values = out.values();
  for (std::size_t i = 0; i < k; ++i) {
    predicted[i].valid_frames = chunks[i].valid_frames;
    for (std::size_t r = 0; r < kMelBands; ++r) {
      for (std::size_t t = 0; t < chunks[i].valid_frames; ++t) {
        predicted[i].matrix(r, t) = values[i * plane + r * kChunkFrames + t];
      }
    }
  }
  Enhanced e;
  e.log_mel = assemble(predicted);
  e.waveform = mel_invert(e.log_mel, spec);
  return e;
}

std::vector<EvalRun> evaluate_unprocessed(const std::vector<LoadedUtterance>& items) {
  std::vector<EvalRun> runs;
  for (const auto& u : items) {
    runs.push_back({kUnprocessed, u.entry.snr_db, u.entry.noise, score(u.clean, u.mixture)});
  }
  return runs;
}

std::vector<EvalRun> evaluate_model(AvcrnModel& model, const std::string& variant,
                                    const std::vector<LoadedUtterance>& items) {
  std::vector<EvalRun> runs;
  for (const auto& u : items) {
    const Enhanced e = enhance(model, u.mixture, u.video);
    runs.push_back({variant, u.entry.snr_db, u.entry.noise, score(u.clean, e.waveform)});
  }
  return runs;
}

AblationResult run_ablation(const std::vector<LoadedUtterance>& items, const RunConfig& config,
                            std::uint64_t seed) {
  const Dataset data = split_dataset(items, config.validation_fraction);
  TrainConfig train_config = config.train;
  train_config.seed = seed;
  ModelConfig base = config.model;
  if (train_config.normalize) base = fit_normalization(base, data.train);

  AblationResult result;
  std::vector<EvalRun> runs = evaluate_unprocessed(items);
  for (Variant v : {Variant::kFull, Variant::kNoFiltering, Variant::kNoBalancing, Variant::kNoMhca}) {
    AvcrnModel model(with_variant(base, v), seed);
    AblationVariant entry;
    entry.name = variant_name(v);
    entry.parameter_count = model.parameter_count();
    TrainResult trained = train(model, TrainingState{}, data, train_config);
    entry.history = std::move(trained.history);
    entry.checkpoint = std::move(trained.best_checkpoint);
    LoadedCheckpoint best = parse_checkpoint(entry.checkpoint);
    const auto scored = evaluate_model(*best.model, entry.name, items);
    runs.insert(runs.end(), scored.begin(), scored.end());
    result.variants.push_back(std::move(entry));
  }
  result.report = build_report(runs);
  return result;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  char buf[40];
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      try {
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw FormatError("matrix csv row " + std::to_string(rows.size() + 1) + ": bad number '" +
                          cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("matrix csv row " + std::to_string(rows.size() + 1) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::copy(rows[r].begin(), rows[r].end(), m.data.begin() + r * m.cols);
  }
  return m;
}

std::vector<std::uint8_t> quantize_image(const Matrix& m) {
  std::vector<std::uint8_t> px(m.data.size(), 0);
  if (m.data.empty()) return px;
  const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
  const double min = *lo, range = *hi - *lo;
  if (!(range > 0.0)) return px;
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * (m.data[i] - min) / range));
  }
  return px;
}

void write_pgm(std::ostream& out, const Matrix& m) {
  const auto px = quantize_image(m);
  out << "P5\n" << m.cols << ' ' << m.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace avse
