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

#ifndef AVSE_PIPELINE_HPP_
#define AVSE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avse/metrics.hpp"
#include "avse/model.hpp"
#include "avse/trainer.hpp"
#include "avse/video.hpp"

namespace avse {

inline constexpr const char* kIndexFile = "index.json";

/// One utterance of an on-disk dataset. File names are relative to the
/// directory holding the index.
struct DatasetEntry {
  std::string id;
  std::string clean;
  std::string mixture;
  std::string video;
  double snr_db = 0.0;
  std::string noise;
  std::uint64_t seed = 0;

  bool operator==(const DatasetEntry&) const = default;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
};

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  /// Cycled over the utterances. When empty each utterance draws its SNR
  /// uniformly from [snr_min_db, snr_max_db].
  std::vector<double> snr_db;
  double snr_min_db = -10.0;
  double snr_max_db = 10.0;
  double duration_s = 1.0;
  NoiseKind noise = NoiseKind::kWhite;
};

/// Seed of utterance `i` of a dataset generated from `base`.
std::uint64_t utterance_seed(std::uint64_t base, std::size_t i);

/// Writes <id>_clean.wav, <id>_mix.wav, <id>.avsg per utterance and the index.
/// Returns every path written, index last.
std::vector<std::filesystem::path> write_synthetic_dataset(const std::filesystem::path& dir,
                                                           const SynthOptions& options);

/// Accepts the dataset directory or the index file itself. Throws FormatError
/// for a malformed index or a referenced file that does not exist.
DatasetIndex read_dataset_index(const std::filesystem::path& path);

struct LoadedUtterance {
  DatasetEntry entry;
  Waveform clean;
  Waveform mixture;
  std::vector<VideoSegment> video;
};

std::vector<LoadedUtterance> load_dataset(const DatasetIndex& index);
Utterance to_examples(const LoadedUtterance& u);

/// The last round(fraction * n) utterances become the validation split; at
/// least one stays in training.
Dataset split_dataset(const std::vector<LoadedUtterance>& items, double validation_fraction);

/// Model and training settings read from one JSON document:
/// {"preset": "default"|"tiny", "model": {...}, "train": {...},
///  "validation_fraction": x}. Model fields override the preset.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  double validation_fraction = 0.2;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);

/// --seed if given, else AVSE_SEED (`env_value`, may be null), else `fallback`.
/// Throws ConfigError for a malformed AVSE_SEED.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env_value,
                           std::uint64_t fallback);

struct Enhanced {
  Waveform waveform;
  /// Predicted log-Mel, 80 x T over the mixture's frames.
  Matrix log_mel;
};

/// Eval-mode chunked inference: mixture log-Mel chunks (segment k paired with
/// chunk k, the last segment repeated), reassembly, and inversion with the
/// mixture phase. An empty `video` is an error for a video-using model unless
/// `zero_video` is set, in which case black frames are fed.
Enhanced enhance(AvcrnModel& model, const Waveform& mixture,
                 const std::vector<VideoSegment>& video, bool zero_video = false);

std::vector<EvalRun> evaluate_unprocessed(const std::vector<LoadedUtterance>& items);
std::vector<EvalRun> evaluate_model(AvcrnModel& model, const std::string& variant,
                                    const std::vector<LoadedUtterance>& items);

struct AblationVariant {
  std::string name;
  std::size_t parameter_count = 0;
  std::vector<LossRecord> history;
  std::vector<std::uint8_t> checkpoint;
};

struct AblationResult {
  std::vector<AblationVariant> variants;
  EvalReport report;
};

/// Trains the four variants from the same model seed on the same split and
/// scores each on `items` next to the unprocessed mixtures.
AblationResult run_ablation(const std::vector<LoadedUtterance>& items, const RunConfig& config,
                            std::uint64_t seed);

/// Row-per-Mel-bin CSV at full precision.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);

/// Linear min-max mapping to 0..255, row-major; a constant matrix maps to 0.
std::vector<std::uint8_t> quantize_image(const Matrix& m);
/// Binary PGM, height = rows (Mel bins), width = columns (frames).
void write_pgm(std::ostream& out, const Matrix& m);

}  // namespace avse

#endif  // AVSE_PIPELINE_HPP_
