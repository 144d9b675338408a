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

#include "avse/optim.hpp"

#include <cmath>

#include "avse/error.hpp"

namespace avse {

void adam_update(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, std::uint64_t t, const AdamConfig& c) {
  if (t == 0) throw ContractError("adam: step numbering starts at 1");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void adam_step(std::vector<ParamRef>& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam: state tracks " + std::to_string(state.m.size()) +
                        " tensors but " + std::to_string(params.size()) + " were given");
  }
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& t = params[k].tensor;
    std::span<const double> g;
    if (t.has_grad()) g = t.grad();
    adam_update(t.mutable_values(), g, state.m[k], state.v[k], state.step, config);
  }
}

double grad_norm(const std::vector<ParamRef>& params) {
  double acc = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

double clip_grad_norm(std::vector<ParamRef>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.mutable_grad()) g *= s;
    }
  }
  return norm;
}

}  // namespace avse
