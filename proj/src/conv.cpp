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

#include <algorithm>
#include <limits>
#include <string>

#include "avse/error.hpp"
#include "avse/ops.hpp"

namespace avse {

using detail::make_op;
using detail::Node;

namespace {

// Index relation shared by conv2d and its transpose: a position `o` on the
// strided ("small") side touches big-side position o * stride + k - pad.
struct ConvGeom {
  std::size_t n, c_small, c_big;
  std::size_t hs, ws, hb, wb;
  std::size_t kh, kw;
  Size2 stride, pad;
};

struct Range {
  std::size_t lo, hi;  // [lo, hi)
};

Range valid_range(std::size_t small, std::size_t big, std::size_t k, std::size_t s,
                  std::size_t p) {
  // 0 <= o*s + k - p < big
  const long kl = static_cast<long>(k), pl = static_cast<long>(p), sl = static_cast<long>(s);
  long lo = 0;
  if (pl > kl) lo = (pl - kl + sl - 1) / sl;
  const long top = static_cast<long>(big) - 1 + pl - kl;
  if (top < 0) return {0, 0};
  long hi = top / sl + 1;
  hi = std::min<long>(hi, static_cast<long>(small));
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

enum class Flow { kGather, kScatter, kKernelGrad };

// kGather:     small[n,s] += big[n,b] * k[s,b]
// kScatter:    big[n,b]   += small[n,s] * k[s,b]
// kKernelGrad: k[s,b]     += big[n,b] * small[n,s]
void conv_loop(const ConvGeom& g, Flow flow, const double* kernel, double* kernel_out,
               const double* big, double* big_out, const double* small, double* small_out) {
  const std::size_t hw_s = g.hs * g.ws, hw_b = g.hb * g.wb;
  for (std::size_t ki = 0; ki < g.kh; ++ki) {
    const Range rh = valid_range(g.hs, g.hb, ki, g.stride.h, g.pad.h);
    for (std::size_t kj = 0; kj < g.kw; ++kj) {
      const Range rw = valid_range(g.ws, g.wb, kj, g.stride.w, g.pad.w);
      if (rh.lo >= rh.hi || rw.lo >= rw.hi) continue;
      for (std::size_t s = 0; s < g.c_small; ++s) {
        for (std::size_t b = 0; b < g.c_big; ++b) {
          const std::size_t kidx = ((s * g.c_big + b) * g.kh + ki) * g.kw + kj;
          const double w = flow == Flow::kKernelGrad ? 0.0 : kernel[kidx];
          double kacc = 0.0;
          for (std::size_t n = 0; n < g.n; ++n) {
            const std::size_t sbase = (n * g.c_small + s) * hw_s;
            const std::size_t bbase = (n * g.c_big + b) * hw_b;
            for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
              const std::size_t ih = oh * g.stride.h + ki - g.pad.h;
              const std::size_t srow = sbase + oh * g.ws;
              const std::size_t brow = bbase + ih * g.wb + kj - g.pad.w;
              const std::size_t sw = g.stride.w;
              switch (flow) {
                case Flow::kGather:
                  for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                    small_out[srow + ow] += w * big[brow + ow * sw];
                  }
                  break;
                case Flow::kScatter:
                  for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                    big_out[brow + ow * sw] += w * small[srow + ow];
                  }
                  break;
                case Flow::kKernelGrad:
                  for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                    kacc += big[brow + ow * sw] * small[srow + ow];
                  }
                  break;
              }
            }
          }
          if (flow == Flow::kKernelGrad) kernel_out[kidx] += kacc;
        }
      }
    }
  }
}

void check_conv_args(const char* op, const Tensor& input, const Tensor& kernel,
                     std::size_t kernel_in_axis, Size2 stride) {
  if (input.rank() != 4) {
    throw DimensionError(std::string(op) + ": input must be [N,C,H,W], got " +
                         shape_str(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw DimensionError(std::string(op) + ": kernel must be rank 4, got " +
                         shape_str(kernel.shape()));
  }
  if (kernel.dim(kernel_in_axis) != input.dim(1)) {
    throw DimensionError(std::string(op) + ": input channels (axis 1) = " +
                         std::to_string(input.dim(1)) + " but kernel axis " +
                         std::to_string(kernel_in_axis) + " = " +
                         std::to_string(kernel.dim(kernel_in_axis)));
  }
  if (stride.h == 0 || stride.w == 0) throw DimensionError(std::string(op) + ": stride must be >= 1");
}

void check_bias(const char* op, const Tensor& bias, std::size_t channels) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw DimensionError(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(channels) + " output channels");
  }
}

void add_bias(std::vector<double>& y, const Tensor& bias, std::size_t n, std::size_t c,
              std::size_t hw) {
  if (!bias.defined()) return;
  auto bv = bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* row = y.data() + (i * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) row[p] += bv[ch];
    }
  }
}

void bias_grad(std::vector<double>& gb, const std::vector<double>& gy, std::size_t n,
               std::size_t c, std::size_t hw) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* row = gy.data() + (i * c + ch) * hw;
      double acc = 0.0;
      for (std::size_t p = 0; p < hw; ++p) acc += row[p];
      gb[ch] += acc;
    }
  }
}

std::vector<double>* grad_of(Node& out, std::size_t i) {
  Node* p = out.parents[i].get();
  if (p == nullptr || !p->requires_grad) return nullptr;
  return &p->ensure_grad();
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Size2 stride,
              Size2 padding) {
  check_conv_args("conv2d", input, kernel, 1, stride);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t hp = input.dim(2) + 2 * padding.h, wp = input.dim(3) + 2 * padding.w;
  if (kh > hp || kw > wp) {
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than padded input " + std::to_string(hp) + "x" +
                         std::to_string(wp) + " (axes 2,3)");
  }
  ConvGeom g{input.dim(0), kernel.dim(0), input.dim(1),
             (hp - kh) / stride.h + 1, (wp - kw) / stride.w + 1,
             input.dim(2), input.dim(3), kh, kw, stride, padding};
  check_bias("conv2d", bias, g.c_small);
  Shape shape{g.n, g.c_small, g.hs, g.ws};
  std::vector<double> y(shape_numel(shape), 0.0);
  conv_loop(g, Flow::kGather, kernel.values().data(), nullptr, input.values().data(), nullptr,
            nullptr, y.data());
  add_bias(y, bias, g.n, g.c_small, g.hs * g.ws);
  return make_op("conv2d", shape, std::move(y), {input, kernel, bias}, [g](Node& out) {
    const auto& in = out.parents[0]->value;
    const auto& k = out.parents[1]->value;
    if (auto* gi = grad_of(out, 0)) {
      conv_loop(g, Flow::kScatter, k.data(), nullptr, nullptr, gi->data(), out.grad.data(), nullptr);
    }
    if (auto* gk = grad_of(out, 1)) {
      conv_loop(g, Flow::kKernelGrad, nullptr, gk->data(), in.data(), nullptr, out.grad.data(),
                nullptr);
    }
    if (auto* gb = grad_of(out, 2)) bias_grad(*gb, out.grad, g.n, g.c_small, g.hs * g.ws);
  });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        Size2 stride, Size2 padding) {
  check_conv_args("conv_transpose2d", input, kernel, 0, stride);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  const long h = static_cast<long>((input.dim(2) - 1) * stride.h + kh) -
                 2 * static_cast<long>(padding.h);
  const long w = static_cast<long>((input.dim(3) - 1) * stride.w + kw) -
                 2 * static_cast<long>(padding.w);
  if (h <= 0 || w <= 0) {
    throw DimensionError("conv_transpose2d: padding too large for input " +
                         shape_str(input.shape()) + " and kernel " + shape_str(kernel.shape()));
  }
  ConvGeom g{input.dim(0), input.dim(1), kernel.dim(1), input.dim(2), input.dim(3),
             static_cast<std::size_t>(h), static_cast<std::size_t>(w), kh, kw, stride, padding};
  check_bias("conv_transpose2d", bias, g.c_big);
  Shape shape{g.n, g.c_big, g.hb, g.wb};
  std::vector<double> y(shape_numel(shape), 0.0);
  conv_loop(g, Flow::kScatter, kernel.values().data(), nullptr, nullptr, y.data(),
            input.values().data(), nullptr);
  add_bias(y, bias, g.n, g.c_big, g.hb * g.wb);
  return make_op("conv_transpose2d", shape, std::move(y), {input, kernel, bias}, [g](Node& out) {
    const auto& in = out.parents[0]->value;
    const auto& k = out.parents[1]->value;
    if (auto* gi = grad_of(out, 0)) {
      conv_loop(g, Flow::kGather, k.data(), nullptr, out.grad.data(), nullptr, nullptr, gi->data());
    }
    if (auto* gk = grad_of(out, 1)) {
      conv_loop(g, Flow::kKernelGrad, nullptr, gk->data(), out.grad.data(), nullptr, in.data(),
                nullptr);
    }
    if (auto* gb = grad_of(out, 2)) bias_grad(*gb, out.grad, g.n, g.c_big, g.hb * g.wb);
  });
}

Tensor max_pool2d(const Tensor& input, std::size_t k) {
  if (input.rank() != 4) throw DimensionError("max_pool2d: input must be [N,C,H,W]");
  if (k == 0 || input.dim(2) < k || input.dim(3) < k) {
    throw DimensionError("max_pool2d: window " + std::to_string(k) + " does not fit " +
                         shape_str(input.shape()));
  }
  const std::size_t nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / k, ow = w / k;
  auto xv = input.values();
  std::vector<double> y(nc * oh * ow);
  std::vector<std::size_t> arg(y.size());
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            const std::size_t idx = (c * h + i * k + a) * w + j * k + b;
            if (xv[idx] > best) {
              best = xv[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (c * oh + i) * ow + j;
        y[o] = best;
        arg[o] = best_idx;
      }
    }
  }
  BranchLog::note(arg);
  return make_op("max_pool2d", {input.dim(0), input.dim(1), oh, ow}, std::move(y), {input},
                 [arg = std::move(arg)](Node& out) {
                   if (auto* g = grad_of(out, 0)) {
                     for (std::size_t o = 0; o < arg.size(); ++o) (*g)[arg[o]] += out.grad[o];
                   }
                 });
}

Tensor adaptive_avg_pool2d(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  if (input.rank() != 4) throw DimensionError("adaptive_avg_pool2d: input must be [N,C,H,W]");
  if (out_h == 0 || out_w == 0) throw DimensionError("adaptive_avg_pool2d: empty output grid");
  const std::size_t nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  auto bounds = [](std::size_t i, std::size_t in, std::size_t out) {
    const std::size_t lo = i * in / out;
    const std::size_t hi = ((i + 1) * in + out - 1) / out;
    return Range{lo, hi};
  };
  std::vector<Range> rows(out_h), cols(out_w);
  for (std::size_t i = 0; i < out_h; ++i) rows[i] = bounds(i, h, out_h);
  for (std::size_t j = 0; j < out_w; ++j) cols[j] = bounds(j, w, out_w);
  auto xv = input.values();
  std::vector<double> y(nc * out_h * out_w, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (std::size_t a = rows[i].lo; a < rows[i].hi; ++a) {
          for (std::size_t b = cols[j].lo; b < cols[j].hi; ++b) acc += xv[(c * h + a) * w + b];
        }
        const double cnt = static_cast<double>((rows[i].hi - rows[i].lo) * (cols[j].hi - cols[j].lo));
        y[(c * out_h + i) * out_w + j] = acc / cnt;
      }
    }
  }
  return make_op("adaptive_avg_pool2d", {input.dim(0), input.dim(1), out_h, out_w}, std::move(y),
                 {input}, [rows, cols, nc, h, w](Node& out) {
                   auto* g = grad_of(out, 0);
                   if (!g) return;
                   const std::size_t oh = rows.size(), ow = cols.size();
                   for (std::size_t c = 0; c < nc; ++c) {
                     for (std::size_t i = 0; i < oh; ++i) {
                       for (std::size_t j = 0; j < ow; ++j) {
                         const double cnt = static_cast<double>((rows[i].hi - rows[i].lo) *
                                                                (cols[j].hi - cols[j].lo));
                         const double gv = out.grad[(c * oh + i) * ow + j] / cnt;
                         for (std::size_t a = rows[i].lo; a < rows[i].hi; ++a) {
                           for (std::size_t b = cols[j].lo; b < cols[j].hi; ++b) {
                             (*g)[(c * h + a) * w + b] += gv;
                           }
                         }
                       }
                     }
                   }
                 });
}

}  // namespace avse
