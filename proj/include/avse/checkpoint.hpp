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

#ifndef AVSE_CHECKPOINT_HPP_
#define AVSE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <vector>

#include "avse/model.hpp"
#include "avse/optim.hpp"

namespace avse {

struct TrainingState {
  AdamState adam;
  std::uint64_t epoch = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

/// AVCK1 container: magic, u64 length + canonical JSON header (config, epoch,
/// validation loss, Adam step), u64 entry count, then per entry u32 name
/// length, name, u32 rank, u64 dims, little-endian f64 payload. Entries are
/// parameters ("param/"), batch-norm statistics ("buffer/") and Adam moments
/// ("adam.m/", "adam.v/").
std::vector<std::uint8_t> serialize_checkpoint(AvcrnModel& model, const TrainingState& state);
void save_checkpoint(const std::filesystem::path& path, AvcrnModel& model,
                     const TrainingState& state);

struct LoadedCheckpoint {
  std::unique_ptr<AvcrnModel> model;
  TrainingState state;
};

LoadedCheckpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace avse

#endif  // AVSE_CHECKPOINT_HPP_
