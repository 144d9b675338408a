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

// Independent loop-style reference computations used by the tests. Nothing
// here calls into the library's op implementations.

#ifndef AVSE_TESTS_ORACLES_HPP_
#define AVSE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "avse/tensor.hpp"

namespace oracle {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline avse::Tensor random_tensor(const avse::Shape& s, std::mt19937_64& rng,
                                  bool requires_grad = false) {
  return avse::Tensor::from(s, random_values(avse::shape_numel(s), rng), requires_grad);
}

inline avse::Tensor random_tensor_in(const avse::Shape& s, std::mt19937_64& rng, double lo,
                                     double hi, bool requires_grad = false) {
  return avse::Tensor::from(s, random_values(avse::shape_numel(s), rng, lo, hi), requires_grad);
}

// Direct nested-loop cross-correlation with zero padding.
inline std::vector<double> conv2d(const std::vector<double>& x, int n, int cin, int h, int w,
                                  const std::vector<double>& k, int cout, int kh, int kw,
                                  const std::vector<double>& b, int sh, int sw, int ph, int pw,
                                  int& oh, int& ow) {
  oh = (h + 2 * ph - kh) / sh + 1;
  ow = (w + 2 * pw - kw) / sw + 1;
  std::vector<double> y(static_cast<std::size_t>(n * cout * oh * ow), 0.0);
  for (int a = 0; a < n; ++a)
    for (int co = 0; co < cout; ++co)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = b.empty() ? 0.0 : b[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int r = i * sh + u - ph, c = j * sw + v - pw;
                if (r < 0 || r >= h || c < 0 || c >= w) continue;
                acc += x[((a * cin + ci) * h + r) * w + c] * k[((co * cin + ci) * kh + u) * kw + v];
              }
          y[((a * cout + co) * oh + i) * ow + j] = acc;
        }
  return y;
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  int m, int k, int n) {
  std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Single LSTM step, gate order i, f, g, o; returns (h, c).
inline void lstm_step(const std::vector<double>& x, std::vector<double>& h,
                      std::vector<double>& c, const std::vector<double>& w_ih,
                      const std::vector<double>& w_hh, const std::vector<double>& bias,
                      int features, int hidden) {
  std::vector<double> z(4 * hidden);
  for (int g = 0; g < 4 * hidden; ++g) {
    double acc = bias[g];
    for (int f = 0; f < features; ++f) acc += w_ih[g * features + f] * x[f];
    for (int q = 0; q < hidden; ++q) acc += w_hh[g * hidden + q] * h[q];
    z[g] = acc;
  }
  for (int q = 0; q < hidden; ++q) {
    const double i = sigmoid(z[q]), f = sigmoid(z[hidden + q]);
    const double gg = std::tanh(z[2 * hidden + q]), o = sigmoid(z[3 * hidden + q]);
    c[q] = f * c[q] + i * gg;
    h[q] = o * std::tanh(c[q]);
  }
}

inline double rel_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Directional derivative check: compares (f(x+eps d) - f(x-eps d)) / 2eps with
// <grad f, d> for the leaf tensors in `inputs`. Returns the relative error.
inline double directional_check(const std::function<avse::Tensor()>& loss,
                                std::vector<avse::Tensor> inputs, std::mt19937_64& rng,
                                double eps = 1e-4) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> dirs;
  double analytic = 0.0;
  for (auto& t : inputs) {
    dirs.push_back(random_values(t.numel(), rng));
    auto g = t.grad();
    for (std::size_t i = 0; i < g.size(); ++i) analytic += g[i] * dirs.back()[i];
  }
  auto shift = [&](double s) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto v = inputs[k].mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * dirs[k][i];
    }
  };
  double plus, minus;
  {
    avse::NoGradGuard ng;
    shift(eps);
    plus = loss().item();
    shift(-2 * eps);
    minus = loss().item();
    shift(eps);
  }
  return rel_error((plus - minus) / (2 * eps), analytic);
}

// Direct O(N^2) one-sided DFT.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Scale-invariant SDR straight from its definition.
inline double si_sdr(const std::vector<double>& ref, const std::vector<double>& est) {
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    dot += ref[i] * est[i];
    rr += ref[i] * ref[i];
  }
  const double a = dot / rr;
  double tt = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double target = a * ref[i];
    tt += target * target;
    ee += (est[i] - target) * (est[i] - target);
  }
  return 10.0 * std::log10(tt / ee);
}

// Unit-variance AR(1) process x[n] = rho x[n-1] + e[n].
inline std::vector<double> ar1(std::size_t n, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  double prev = 0.0;
  for (auto& v : x) {
    prev = rho * prev + std::sqrt(1.0 - rho * rho) * g(rng);
    v = 0.1 * prev;
  }
  return x;
}

// Channel attention by explicit loops over one [C, S] map pair.
// map[j*C+i] = exp<a_i,b_j> / sum_i' exp<a_i',b_j>; out_j = w sum_i map[j][i] b_i (+ b_j).
struct AttentionOracle {
  std::vector<double> map;
  std::vector<double> out;
};

inline AttentionOracle attention(const std::vector<double>& a, const std::vector<double>& b,
                                 std::size_t c, std::size_t s, double w, bool residual) {
  AttentionOracle r;
  r.map.assign(c * c, 0.0);
  r.out.assign(c * s, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    std::vector<double> score(c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t p = 0; p < s; ++p) score[i] += a[i * s + p] * b[j * s + p];
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < c; ++i) denom += std::exp(score[i]);
    for (std::size_t i = 0; i < c; ++i) r.map[j * c + i] = std::exp(score[i]) / denom;
    for (std::size_t p = 0; p < s; ++p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < c; ++i) acc += r.map[j * c + i] * b[i * s + p];
      r.out[j * s + p] = w * acc + (residual ? b[j * s + p] : 0.0);
    }
  }
  return r;
}

}  // namespace oracle

#endif  // AVSE_TESTS_ORACLES_HPP_
