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

#ifndef AVSE_LAYERS_HPP_
#define AVSE_LAYERS_HPP_

#include <random>
#include <string>
#include <vector>

#include "avse/ops.hpp"
#include "avse/tensor.hpp"

namespace avse {

/// A learnable tensor with its dotted path, e.g. "enc.0.audio.weight".
struct ParamRef {
  std::string name;
  Tensor tensor;
};

/// A named non-learnable state vector (batch-norm running statistics).
struct BufferRef {
  std::string name;
  std::vector<double>* data;
};

/// Tensor of `shape` with entries drawn from U(-bound, bound), requiring grad.
Tensor uniform_param(const Shape& shape, double bound, std::mt19937_64& rng);

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Size2 kernel{1, 1};
  Size2 stride{1, 1};
  Size2 padding{0, 0};
  bool transposed = false;
  /// Batch norm followed by ELU after the convolution.
  bool norm_act = true;
};

/// Convolution (or transposed convolution) with optional BN + ELU.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const ConvSpec& spec, std::mt19937_64& rng);

  Tensor forward(const Tensor& x, BatchNormMode mode);
  void collect(const std::string& prefix, std::vector<ParamRef>& params,
               std::vector<BufferRef>* buffers);
  const ConvSpec& spec() const { return spec_; }

  Tensor weight;
  Tensor bias;
  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;

 private:
  ConvSpec spec_;
};

std::size_t parameter_count(const std::vector<ParamRef>& params);

}  // namespace avse

#endif  // AVSE_LAYERS_HPP_
