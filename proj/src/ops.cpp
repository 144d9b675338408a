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

#include "avse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "avse/error.hpp"

namespace avse {

using detail::make_op;
using detail::Node;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Accumulates into parent `i` only when that parent wants a gradient.
std::vector<double>* grad_of(Node& out, std::size_t i) {
  Node* p = out.parents[i].get();
  if (p == nullptr || !p->requires_grad) return nullptr;
  return &p->ensure_grad();
}

const std::vector<double>& value_of(Node& out, std::size_t i) { return out.parents[i]->value; }

template <typename F, typename DF>
Tensor unary(const char* name, const Tensor& x, F f, DF df) {
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_op(name, x.shape(), std::move(y), {x}, [df](Node& out) {
    auto* gx = grad_of(out, 0);
    if (!gx) return;
    const auto& xv = value_of(out, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += out.grad[i] * df(xv[i], out.value[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return make_op("add", a.shape(), std::move(y), {a, b}, [](Node& out) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(out, k)) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return make_op("sub", a.shape(), std::move(y), {a, b}, [](Node& out) {
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i];
    }
    if (auto* g = grad_of(out, 1)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] -= out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return make_op("mul", a.shape(), std::move(y), {a, b}, [](Node& out) {
    const auto& av = value_of(out, 0);
    const auto& bv = value_of(out, 1);
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i] * bv[i];
    }
    if (auto* g = grad_of(out, 1)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: factor must have one element");
  const double f = s.item();
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * f;
  return make_op("scale_by", x.shape(), std::move(y), {x, s}, [](Node& out) {
    const auto& xv = value_of(out, 0);
    const double f = value_of(out, 1)[0];
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t i = 0; i < xv.size(); ++i) (*g)[i] += out.grad[i] * f;
    }
    if (auto* g = grad_of(out, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) acc += out.grad[i] * xv[i];
      (*g)[0] += acc;
    }
  });
}

namespace {
thread_local BranchLog* active_branch_log = nullptr;
}  // namespace

BranchLog::BranchLog() : previous_(active_branch_log) { active_branch_log = this; }

BranchLog::~BranchLog() { active_branch_log = previous_; }

bool BranchLog::active() { return active_branch_log != nullptr; }

void BranchLog::note(const std::vector<std::size_t>& picks) {
  if (!active_branch_log) return;
  auto& b = active_branch_log->branches_;
  b.push_back(picks.size());
  b.insert(b.end(), picks.begin(), picks.end());
}

Tensor elu(const Tensor& x) {
  if (BranchLog::active()) {
    std::vector<std::size_t> negative;
    const auto v = x.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0.0) negative.push_back(i);
    }
    BranchLog::note(negative);
  }
  return unary(
      "elu", x, [](double v) { return v >= 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v >= 0.0 ? 1.0 : y + 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(x.shape()));
  }
  const AxisSplit sp = split_at(x.shape(), axis);
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      double mx = xv[base];
      for (std::size_t k = 1; k < sp.len; ++k) mx = std::max(mx, xv[base + k * sp.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        const double e = std::exp(xv[base + k * sp.inner] - mx);
        y[base + k * sp.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < sp.len; ++k) y[base + k * sp.inner] /= total;
    }
  }
  return make_op("softmax", x.shape(), std::move(y), {x}, [sp](Node& out) {
    auto* g = grad_of(out, 0);
    if (!g) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < sp.len; ++k) {
          const std::size_t i = base + k * sp.inner;
          dot += out.grad[i] * out.value[i];
        }
        for (std::size_t k = 0; k < sp.len; ++k) {
          const std::size_t i = base + k * sp.inner;
          (*g)[i] += out.value[i] * (out.grad[i] - dot);
        }
      }
    }
  });
}

namespace {

// c[M,N] += a[M,K] * b[K,N] with optional transposes expressed by strides.
void gemm_acc(const double* a, std::size_t a_rs, std::size_t a_cs, const double* b,
              std::size_t b_rs, std::size_t b_cs, double* c, std::size_t m, std::size_t n,
              std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * a_rs + p * a_cs];
      if (av == 0.0) continue;
      const double* brow = b + p * b_rs;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j * b_cs];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.rank() == 3;
  if ((a.rank() != 2 && a.rank() != 3) || b.rank() != a.rank()) {
    throw DimensionError("matmul: expected two rank-2 or two rank-3 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t m = a.dim(off), k = a.dim(off + 1), n = b.dim(off + 1);
  if (b.dim(off) != k || (batched && b.dim(0) != batch)) {
    throw DimensionError("matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  std::vector<double> y(batch * m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (std::size_t t = 0; t < batch; ++t) {
    gemm_acc(av.data() + t * m * k, k, 1, bv.data() + t * k * n, n, 1, y.data() + t * m * n, m,
             n, k);
  }
  return make_op("matmul", shape, std::move(y), {a, b}, [batch, m, n, k](Node& out) {
    const auto& av = value_of(out, 0);
    const auto& bv = value_of(out, 1);
    auto* ga = grad_of(out, 0);
    auto* gb = grad_of(out, 1);
    for (std::size_t t = 0; t < batch; ++t) {
      const double* dy = out.grad.data() + t * m * n;
      // dA = dY B^T ; dB = A^T dY
      if (ga) gemm_acc(dy, n, 1, bv.data() + t * k * n, 1, n, ga->data() + t * m * k, m, k, n);
      if (gb) gemm_acc(av.data() + t * m * k, 1, k, dy, n, 1, gb->data() + t * k * n, k, n, m);
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("transpose: rank must be >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2, "input");
  require_rank("linear", weight, 2, "weight");
  const std::size_t m = x.dim(0), k = x.dim(1), o = weight.dim(0);
  if (weight.dim(1) != k) {
    throw DimensionError("linear: inner dimension mismatch " + shape_str(x.shape()) + " x " +
                         shape_str(weight.shape()) + "^T");
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != o)) {
    throw DimensionError("linear: bias shape " + shape_str(bias.shape()) + " expected [" +
                         std::to_string(o) + "]");
  }
  std::vector<double> y(m * o, 0.0);
  auto xv = x.values(), wv = weight.values();
  gemm_acc(xv.data(), k, 1, wv.data(), 1, k, y.data(), m, o, k);
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < o; ++j) y[i * o + j] += bv[j];
    }
  }
  return make_op("linear", {m, o}, std::move(y), {x, weight, bias}, [m, k, o](Node& out) {
    const auto& xv = value_of(out, 0);
    const auto& wv = value_of(out, 1);
    if (auto* gx = grad_of(out, 0)) gemm_acc(out.grad.data(), o, 1, wv.data(), k, 1, gx->data(), m, k, o);
    if (auto* gw = grad_of(out, 1)) gemm_acc(out.grad.data(), 1, o, xv.data(), k, 1, gw->data(), o, k, m);
    if (auto* gb = grad_of(out, 2)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < o; ++j) (*gb)[j] += out.grad[i * o + j];
      }
    }
  });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<double> y(x.values().begin(), x.values().end());
  return make_op("reshape", shape, std::move(y), {x}, [](Node& out) {
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i];
    }
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.rank();
  if (axes.size() != r) throw DimensionError("permute: axis list has wrong length");
  std::vector<bool> seen(r, false);
  for (auto a : axes) {
    if (a >= r || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  const Shape& in = x.shape();
  Shape shape(r);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  // src_strides[j]: stride in the input of output axis j.
  std::vector<std::size_t> src_strides(r);
  for (std::size_t j = 0; j < r; ++j) {
    shape[j] = in[axes[j]];
    src_strides[j] = in_strides[axes[j]];
  }
  const std::size_t total = x.numel();
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t src = 0;
    for (std::size_t j = 0; j < r; ++j) src += idx[j] * src_strides[j];
    map[flat] = src;
    for (std::size_t j = r; j-- > 0;) {
      if (++idx[j] < shape[j]) break;
      idx[j] = 0;
    }
  }
  auto xv = x.values();
  std::vector<double> y(total);
  for (std::size_t i = 0; i < total; ++i) y[i] = xv[map[i]];
  return make_op("permute", shape, std::move(y), {x}, [map = std::move(map)](Node& out) {
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t i = 0; i < map.size(); ++i) (*g)[map[i]] += out.grad[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: extent mismatch on axis " + std::to_string(i) + ": " +
                             shape_str(s) + " vs " + shape_str(first));
      }
    }
    shape[axis] += s[axis];
  }
  const AxisSplit sp = split_at(shape, axis);
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.dim(axis) * sp.inner);
  const std::size_t row = sp.len * sp.inner;
  std::vector<double> y(shape_numel(shape));
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.data() + o * widths[k], widths[k], y.data() + o * row + col);
    }
    col += widths[k];
  }
  return make_op("concat", shape, std::move(y), parts, [widths, sp, row](Node& out) {
    std::size_t col = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (auto* g = grad_of(out, k)) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < widths[k]; ++i) {
            (*g)[o * widths[k] + i] += out.grad[o * row + col + i];
          }
        }
      }
      col += widths[k];
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid on axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t width = (end - begin) * sp.inner;
  const std::size_t row = sp.len * sp.inner;
  const std::size_t col = begin * sp.inner;
  auto xv = x.values();
  std::vector<double> y(sp.outer * width);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(xv.data() + o * row + col, width, y.data() + o * width);
  }
  return make_op("slice", shape, std::move(y), {x}, [sp, width, row, col](Node& out) {
    if (auto* g = grad_of(out, 0)) {
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < width; ++i) (*g)[o * row + col + i] += out.grad[o * width + i];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_op("sum", {1}, {total}, {x}, [](Node& out) {
    if (auto* g = grad_of(out, 0)) {
      for (auto& v : *g) v += out.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace avse
