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

#include "avse/layers.hpp"

#include <cmath>

#include "avse/lstm_layer.hpp"

namespace avse {

Tensor uniform_param(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(shape, std::move(values), true);
}

ConvBlock::ConvBlock(const ConvSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  const std::size_t taps = spec.kernel.h * spec.kernel.w;
  // Fan-in follows the second kernel axis, as torch does for both conv kinds.
  const std::size_t fan_in = (spec.transposed ? spec.out_channels : spec.in_channels) * taps;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  const Shape shape = spec.transposed
                          ? Shape{spec.in_channels, spec.out_channels, spec.kernel.h, spec.kernel.w}
                          : Shape{spec.out_channels, spec.in_channels, spec.kernel.h, spec.kernel.w};
  weight = uniform_param(shape, bound, rng);
  bias = uniform_param({spec.out_channels}, bound, rng);
  if (spec.norm_act) {
    gamma = Tensor::full({spec.out_channels}, 1.0, true);
    beta = Tensor::zeros({spec.out_channels}, true);
    stats = BatchNormStats(spec.out_channels);
  }
}

Tensor ConvBlock::forward(const Tensor& x, BatchNormMode mode) {
  Tensor y = spec_.transposed ? conv_transpose2d(x, weight, bias, spec_.stride, spec_.padding)
                              : conv2d(x, weight, bias, spec_.stride, spec_.padding);
  if (!spec_.norm_act) return y;
  return elu(batch_norm(y, gamma, beta, stats, mode));
}

void ConvBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                        std::vector<BufferRef>* buffers) {
  params.push_back({prefix + ".weight", weight});
  params.push_back({prefix + ".bias", bias});
  if (!spec_.norm_act) return;
  params.push_back({prefix + ".bn.gamma", gamma});
  params.push_back({prefix + ".bn.beta", beta});
  if (buffers) {
    buffers->push_back({prefix + ".bn.running_mean", &stats.mean});
    buffers->push_back({prefix + ".bn.running_var", &stats.var});
  }
}

std::size_t parameter_count(const std::vector<ParamRef>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

LstmLayer::LstmLayer(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  weights.w_ih = uniform_param({4 * hidden, input}, bound, rng);
  weights.w_hh = uniform_param({4 * hidden, hidden}, bound, rng);
  weights.bias = uniform_param({4 * hidden}, bound, rng);
}

void LstmLayer::collect(const std::string& prefix, std::vector<ParamRef>& params) const {
  params.push_back({prefix + ".w_ih", weights.w_ih});
  params.push_back({prefix + ".w_hh", weights.w_hh});
  params.push_back({prefix + ".bias", weights.bias});
}

}  // namespace avse
