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

#ifndef AVSE_LSTM_LAYER_HPP_
#define AVSE_LSTM_LAYER_HPP_

#include <random>
#include <string>
#include <vector>

#include "avse/layers.hpp"

namespace avse {

/// One LSTM layer over [T,N,F] with zero initial state.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const { return lstm_sequence(x, weights); }
  void collect(const std::string& prefix, std::vector<ParamRef>& params) const;

  LstmWeights weights;
};

}  // namespace avse

#endif  // AVSE_LSTM_LAYER_HPP_
