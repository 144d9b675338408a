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

#include <string>

#include "avse/error.hpp"
#include "avse/ops.hpp"

namespace avse {

Tensor lstm_sequence(const Tensor& input, const LstmWeights& weights, const Tensor& h0,
                     const Tensor& c0, Tensor* final_cell) {
  if (input.rank() != 3) {
    throw DimensionError("lstm_sequence: input must be [T,N,F], got " + shape_str(input.shape()));
  }
  const std::size_t steps = input.dim(0), batch = input.dim(1), features = input.dim(2);
  const std::size_t gates = weights.w_ih.dim(0);
  if (gates % 4 != 0 || weights.w_ih.dim(1) != features) {
    throw DimensionError("lstm_sequence: w_ih shape " + shape_str(weights.w_ih.shape()) +
                         " incompatible with " + std::to_string(features) + " input features");
  }
  const std::size_t hidden = gates / 4;
  if (weights.w_hh.shape() != Shape{gates, hidden}) {
    throw DimensionError("lstm_sequence: w_hh must be " + shape_str({gates, hidden}));
  }
  const Shape state_shape{batch, hidden};
  Tensor h = h0.defined() ? h0 : Tensor::zeros(state_shape);
  Tensor c = c0.defined() ? c0 : Tensor::zeros(state_shape);
  if (h.shape() != state_shape || c.shape() != state_shape) {
    throw DimensionError("lstm_sequence: initial state must be " + shape_str(state_shape));
  }

  // Input projections for every step at once: [T*N, 4H].
  const Tensor projected =
      linear(reshape(input, {steps * batch, features}), weights.w_ih, weights.bias);
  std::vector<Tensor> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor z = slice(projected, 0, t * batch, (t + 1) * batch) + linear(h, weights.w_hh, {});
    Tensor i = sigmoid(slice(z, 1, 0, hidden));
    Tensor f = sigmoid(slice(z, 1, hidden, 2 * hidden));
    Tensor g = tanh(slice(z, 1, 2 * hidden, 3 * hidden));
    Tensor o = sigmoid(slice(z, 1, 3 * hidden, 4 * hidden));
    c = f * c + i * g;
    h = o * tanh(c);
    outputs.push_back(reshape(h, {1, batch, hidden}));
  }
  if (final_cell != nullptr) *final_cell = c;
  return concat(outputs, 0);
}

}  // namespace avse
