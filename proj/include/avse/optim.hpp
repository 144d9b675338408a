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

#ifndef AVSE_OPTIM_HPP_
#define AVSE_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "avse/layers.hpp"

namespace avse {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one vector per parameter tensor in order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of a flat parameter at (1-based) step t.
void adam_update(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, std::uint64_t t, const AdamConfig& config);

/// Advances the step counter and updates every parameter from its gradient.
/// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::vector<ParamRef>& params, AdamState& state, const AdamConfig& config);

/// Global L2 norm of all gradients.
double grad_norm(const std::vector<ParamRef>& params);

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::vector<ParamRef>& params, double max_norm);

}  // namespace avse

#endif  // AVSE_OPTIM_HPP_
