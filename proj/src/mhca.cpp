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

#include "avse/mhca.hpp"

#include <string>

#include "avse/error.hpp"

namespace avse {

namespace {

void require_same_shape(const char* stage, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string("mhca ") + stage + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
  }
}

// Re-labels numeric failures with the stage they occurred in.
template <typename F>
Tensor in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    throw NumericError(std::string("mhca ") + stage + ": " + e.what());
  }
}

}  // namespace

Attention attend(const Tensor& a, const Tensor& b, const Tensor& weight, std::size_t heads,
                 bool residual) {
  if (a.rank() != 4 || a.shape() != b.shape()) {
    throw DimensionError("attend: expected two equal [N,C,H,W] maps, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), c = a.dim(1), s = a.dim(2) * a.dim(3);
  if (heads == 0 || c % heads != 0) {
    throw ConfigError("attend: " + std::to_string(c) + " channels not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const Shape grouped{n * heads, c / heads, s};
  const Tensor ag = reshape(a, grouped);
  const Tensor bg = reshape(b, grouped);
  Attention out;
  out.map = softmax(matmul(bg, transpose(ag)), 2);
  Tensor mixed = scale_by(reshape(matmul(out.map, bg), b.shape()), weight);
  out.output = residual ? add(mixed, b) : mixed;
  return out;
}

MhcaBlock::MhcaBlock(std::size_t channels, const MhcaOptions& options, std::mt19937_64& rng)
    : channels_(channels), options_(options) {
  if (options.heads == 0 || channels % options.heads != 0) {
    throw ConfigError("mhca: " + std::to_string(channels) + " channels not divisible by " +
                      std::to_string(options.heads) + " heads");
  }
  const ConvSpec pointwise{channels, channels, {1, 1}, {1, 1}, {0, 0}, false, true};
  if (options.balancing) {
    conv_k = ConvBlock(pointwise, rng);
    conv_v = ConvBlock(pointwise, rng);
    alpha = Tensor::scalar(0.0, true);
  }
  if (options.filtering) {
    conv_q = ConvBlock(pointwise, rng);
    beta = Tensor::scalar(0.0, true);
  }
  deconv_gate = ConvBlock({channels, channels, {1, 1}, {1, 1}, {0, 0}, true, false}, rng);
}

Tensor MhcaBlock::balance(const Tensor& fused, BatchNormMode mode, MhcaTrace* trace) {
  if (!options_.balancing) return fused;
  return in_stage("balance", [&] {
    Tensor k = conv_k.forward(fused, mode);
    Tensor v = conv_v.forward(fused, mode);
    Attention att = attend(k, v, alpha, options_.heads, !options_.strict);
    if (trace) {
      trace->k = k;
      trace->v = v;
      trace->x_map = att.map;
      trace->g = att.output;
    }
    return att.output;
  });
}

Tensor MhcaBlock::filter(const Tensor& g, const Tensor& decoder, BatchNormMode mode,
                         MhcaTrace* trace) {
  require_same_shape("filter", g, decoder);
  if (!options_.filtering) return g;
  return in_stage("filter", [&] {
    Tensor q = conv_q.forward(decoder, mode);
    Attention att = attend(q, g, beta, options_.heads, !options_.strict);
    if (trace) {
      trace->q = q;
      trace->y_map = att.map;
      trace->l = att.output;
    }
    return att.output;
  });
}

Tensor MhcaBlock::gate(const Tensor& l, const Tensor& decoder, MhcaTrace* trace) {
  return in_stage("gate", [&] {
    Tensor s = sigmoid(deconv_gate.forward(l, BatchNormMode::kEval));
    require_same_shape("gate", s, decoder);
    if (trace) trace->gate = s;
    return mul(s, decoder);
  });
}

Tensor MhcaBlock::forward(const Tensor& fused, const Tensor& decoder, BatchNormMode mode,
                          MhcaTrace* trace) {
  require_same_shape("forward", fused, decoder);
  if (fused.rank() != 4 || fused.dim(1) != channels_) {
    throw DimensionError("mhca forward: expected [N," + std::to_string(channels_) +
                         ",H,W], got " + shape_str(fused.shape()));
  }
  Tensor g = balance(fused, mode, trace);
  Tensor l = filter(g, decoder, mode, trace);
  return gate(l, decoder, trace);
}

void MhcaBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                        std::vector<BufferRef>* buffers) {
  if (options_.balancing) {
    conv_k.collect(prefix + ".conv_k", params, buffers);
    conv_v.collect(prefix + ".conv_v", params, buffers);
    params.push_back({prefix + ".alpha", alpha});
  }
  if (options_.filtering) {
    conv_q.collect(prefix + ".conv_q", params, buffers);
    params.push_back({prefix + ".beta", beta});
  }
  deconv_gate.collect(prefix + ".deconv_gate", params, buffers);
}

}  // namespace avse
