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

#ifndef AVSE_TRAINER_HPP_
#define AVSE_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "avse/checkpoint.hpp"
#include "avse/model.hpp"
#include "avse/optim.hpp"
#include "avse/video.hpp"

namespace avse {

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 4;  // utterances per batch
  std::size_t max_epochs = 10;
  std::uint64_t seed = 0;
  double snr_min_db = -10.0;
  double snr_max_db = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clipping threshold; 0 disables clipping.
  double clip_norm = 0.0;
  /// Fit the model's feature normalization to the training data before training.
  bool normalize = true;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, eps}; }
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// An utterance is its sequence of aligned 200 ms examples.
using Utterance = std::vector<AVExample>;

struct Dataset {
  std::vector<Utterance> train;
  std::vector<Utterance> validation;
};

/// Utterances padded with zero chunks to the longest one. Tensors are
/// [B*K,1,80,20] (video [B*K,5,80,80]) with utterance b occupying rows
/// b*K..b*K+K-1. mask is 1 on valid frames of valid chunks, 0 elsewhere.
struct Batch {
  std::size_t utterances = 0;
  std::size_t chunks_per_utterance = 0;
  std::vector<std::size_t> valid_chunks;
  Tensor mixture;
  Tensor video;
  Tensor target;
  Tensor mask;
};

Batch make_batch(const std::vector<const Utterance*>& utterances);
Batch make_batch(const std::vector<Utterance>& utterances);

/// Drops chunks that are entirely padding, so they cannot influence
/// batch-norm statistics.
Batch compact(const Batch& batch);

/// Mean of squared differences over elements where mask is 1.
Tensor mse_loss(const Tensor& prediction, const Tensor& target, const Tensor& mask);

/// Sets the model config's normalization from the training utterances.
ModelConfig fit_normalization(ModelConfig config, const std::vector<Utterance>& train);

/// Eval-mode masked MSE over a set of utterances.
double evaluate_loss(AvcrnModel& model, const std::vector<Utterance>& utterances,
                     std::size_t batch_size);

struct LossRecord {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool operator==(const LossRecord&) const = default;
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::vector<std::uint8_t> best_checkpoint;
  double best_val_loss = 0.0;
  std::uint64_t best_epoch = 0;
  /// State after the last epoch (resume point).
  TrainingState final_state;
};

/// Trains `model` in place for epochs state.epoch .. config.max_epochs - 1.
/// Validation falls back to the training set when none is given.
TrainResult train(AvcrnModel& model, TrainingState state, const Dataset& data,
                  const TrainConfig& config,
                  const std::function<void(const LossRecord&)>& on_step = {});

void write_history_csv(std::ostream& out, const std::vector<LossRecord>& history);

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  /// Samples redrawn because the +/- evaluations took different branches of a
  /// non-smooth op (max-pool winner or elu sign).
  std::size_t kinks_skipped = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Compares analytic gradients of `loss` with central differences on a
/// deterministic subsample of `samples` scalars per tensor. Relative error is
/// |a - n| / max(|a|, |n|, floor) where floor = kFdResolution * max(1, |L|) / step
/// is the smallest derivative the difference quotient resolves in double
/// precision. Samples whose +/- evaluations take different branches of a
/// non-smooth op (see BranchLog) are redrawn.
GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<ParamRef> params,
                           std::size_t samples = 20, double step = 1e-4, std::uint64_t seed = 0);

/// Relative loss resolution assumed by grad_check's floor.
inline constexpr double kFdResolution = 1e-10;

/// Model-level check on one batch in the given batch-norm mode.
GradCheckReport grad_check(AvcrnModel& model, const Batch& batch, BatchNormMode mode,
                           std::size_t samples = 20, double step = 1e-4);

}  // namespace avse

#endif  // AVSE_TRAINER_HPP_
