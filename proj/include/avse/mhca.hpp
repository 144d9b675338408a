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

#ifndef AVSE_MHCA_HPP_
#define AVSE_MHCA_HPP_

#include <random>
#include <string>
#include <vector>

#include "avse/layers.hpp"

namespace avse {

struct MhcaOptions {
  std::size_t heads = 1;
  /// Literal attention outputs without the residual term.
  bool strict = false;
  bool balancing = true;
  bool filtering = true;
};

struct Attention {
  Tensor output;  // same shape as b
  Tensor map;     // [N * heads, C / heads, C / heads], rows sum to 1
};

/// Channel attention between feature maps a and b of shape [N,C,H,W].
/// map[j][i] = softmax over i of <a_i, b_j> (inner product over H*W), and
/// output_j = weight * sum_i map[j][i] * b_i, plus b_j when `residual`.
/// Channels are split into `heads` contiguous groups attended independently.
Attention attend(const Tensor& a, const Tensor& b, const Tensor& weight, std::size_t heads,
                 bool residual);

/// Intermediates of one forward pass, for inspection in tests.
struct MhcaTrace {
  Tensor k, v, q;
  Tensor g, l;
  Tensor x_map, y_map;
  Tensor gate;
};

/// Two-stage cross-attention between a fused encoder map F_f and a decoder
/// map F_d of identical shape. balance: K, V from F_f give G. filter: Q from
/// F_d attends over G giving L. gate: sigmoid(deconv(L)) scales F_d.
class MhcaBlock {
 public:
  MhcaBlock() = default;
  MhcaBlock(std::size_t channels, const MhcaOptions& options, std::mt19937_64& rng);

  Tensor balance(const Tensor& fused, BatchNormMode mode, MhcaTrace* trace = nullptr);
  Tensor filter(const Tensor& g, const Tensor& decoder, BatchNormMode mode,
                MhcaTrace* trace = nullptr);
  Tensor gate(const Tensor& l, const Tensor& decoder, MhcaTrace* trace = nullptr);
  Tensor forward(const Tensor& fused, const Tensor& decoder, BatchNormMode mode,
                 MhcaTrace* trace = nullptr);

  void collect(const std::string& prefix, std::vector<ParamRef>& params,
               std::vector<BufferRef>* buffers);
  const MhcaOptions& options() const { return options_; }
  std::size_t channels() const { return channels_; }

  ConvBlock conv_k, conv_v, conv_q;
  ConvBlock deconv_gate;
  Tensor alpha;
  Tensor beta;

 private:
  std::size_t channels_ = 0;
  MhcaOptions options_;
};

}  // namespace avse

#endif  // AVSE_MHCA_HPP_
