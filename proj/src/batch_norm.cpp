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

#include <cmath>
#include <string>

#include "avse/error.hpp"
#include "avse/ops.hpp"

namespace avse {

using detail::make_op;
using detail::Node;

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, BatchNormMode mode, double eps, double momentum) {
  if (input.rank() != 4 && input.rank() != 2) {
    throw DimensionError("batch_norm: input must be [N,C,H,W] or [N,C], got " +
                         shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t hw = input.rank() == 4 ? input.dim(2) * input.dim(3) : 1;
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("batch_norm: gamma/beta must have " + std::to_string(c) + " entries");
  }
  if (stats.mean.size() != c || stats.var.size() != c) {
    throw DimensionError("batch_norm: running stats sized for " +
                         std::to_string(stats.mean.size()) + " channels, input has " +
                         std::to_string(c));
  }
  const std::size_t count = n * hw;
  const bool train = mode == BatchNormMode::kTrain;
  if (train && count < 2) {
    throw NumericError("batch_norm: degenerate batch, train mode needs at least 2 values per "
                       "channel (N*H*W = " + std::to_string(count) + ")");
  }
  auto xv = input.values();
  auto gv = gamma.values(), bv = beta.values();
  std::vector<double> mu(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (train) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = xv.data() + (i * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) s += row[p];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = xv.data() + (i * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) ss += (row[p] - m) * (row[p] - m);
      }
      const double var = ss / static_cast<double>(count);
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(var + eps);
      stats.mean[ch] = (1.0 - momentum) * stats.mean[ch] + momentum * m;
      stats.var[ch] = (1.0 - momentum) * stats.var[ch] +
                      momentum * ss / static_cast<double>(count - 1);
    } else {
      mu[ch] = stats.mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.var[ch] + eps);
    }
  }
  std::vector<double> xhat(xv.size()), y(xv.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        xhat[base + p] = (xv[base + p] - mu[ch]) * inv_std[ch];
        y[base + p] = gv[ch] * xhat[base + p] + bv[ch];
      }
    }
  }
  return make_op(
      "batch_norm", input.shape(), std::move(y), {input, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw, count, train](Node& out) {
        const auto& gamma_v = out.parents[1]->value;
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (i * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
              sum_dy[ch] += out.grad[base + p];
              sum_dy_xhat[ch] += out.grad[base + p] * xhat[base + p];
            }
          }
        }
        auto want = [&](std::size_t k) {
          Node* p = out.parents[k].get();
          return p != nullptr && p->requires_grad;
        };
        if (want(1)) {
          auto& g = out.parents[1]->ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
        }
        if (want(2)) {
          auto& g = out.parents[2]->ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
        }
        if (want(0)) {
          auto& g = out.parents[0]->ensure_grad();
          const double m = static_cast<double>(count);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t base = (i * c + ch) * hw;
              const double k = gamma_v[ch] * inv_std[ch];
              for (std::size_t p = 0; p < hw; ++p) {
                const double dy = out.grad[base + p];
                if (train) {
                  g[base + p] +=
                      k * (dy - sum_dy[ch] / m - xhat[base + p] * sum_dy_xhat[ch] / m);
                } else {
                  g[base + p] += k * dy;
                }
              }
            }
          }
        }
      });
}

}  // namespace avse
