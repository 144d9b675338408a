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
#include <random>

#include "avse/error.hpp"
#include "avse/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avse;

namespace {

double max_abs_diff(std::span<const double> a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv2d of ones with a 2x2 ones kernel and stride 2 gives fours") {
  auto x = Tensor::full({1, 1, 4, 4}, 1.0);
  auto k = Tensor::full({1, 1, 2, 2}, 1.0);
  auto y = conv2d(x, k, Tensor::zeros({1}), {2, 2}, {0, 0});
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.values()) CHECK(v == 4.0);
}

TEST_CASE("conv2d with a unit delta kernel is the identity") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor({2, 1, 5, 7}, rng);
  auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), {}, {1, 1}, {0, 0});
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d matches the nested-loop oracle on random shapes") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 4), ext(3, 8), st(1, 2), pd(0, 1), ks(1, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = dim(rng), cin = dim(rng), cout = dim(rng), h = ext(rng), w = ext(rng);
    const int kh = ks(rng), kw = ks(rng), sh = st(rng), sw = st(rng), ph = pd(rng), pw = pd(rng);
    auto xv = oracle::random_values(n * cin * h * w, rng);
    auto kv = oracle::random_values(cout * cin * kh * kw, rng);
    auto bv = oracle::random_values(cout, rng);
    int oh = 0, ow = 0;
    auto expect = oracle::conv2d(xv, n, cin, h, w, kv, cout, kh, kw, bv, sh, sw, ph, pw, oh, ow);
    auto y = conv2d(Tensor::from({size_t(n), size_t(cin), size_t(h), size_t(w)}, xv),
                    Tensor::from({size_t(cout), size_t(cin), size_t(kh), size_t(kw)}, kv),
                    Tensor::from({size_t(cout)}, bv), {size_t(sh), size_t(sw)},
                    {size_t(ph), size_t(pw)});
    REQUIRE(y.shape() == Shape{size_t(n), size_t(cout), size_t(oh), size_t(ow)});
    CHECK(max_abs_diff(y.values(), expect) < 1e-12);
  }
}

TEST_CASE("conv2d spec example: 1x2x5x5 input, 3x2x3x3 kernel, stride (2,1)") {
  std::mt19937_64 rng(5);
  auto xv = oracle::random_values(50, rng);
  auto kv = oracle::random_values(54, rng);
  int oh = 0, ow = 0;
  auto expect = oracle::conv2d(xv, 1, 2, 5, 5, kv, 3, 3, 3, {}, 2, 1, 0, 0, oh, ow);
  auto y = conv2d(Tensor::from({1, 2, 5, 5}, xv), Tensor::from({3, 2, 3, 3}, kv), {}, {2, 1},
                  {0, 0});
  CHECK(y.shape() == Shape{1, 3, 2, 3});
  CHECK(max_abs_diff(y.values(), expect) < 1e-12);
}

TEST_CASE("conv2d rejects mismatched channels and oversize kernels") {
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 2, 2}), {}, {1, 1}, {0, 0}),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), {}, {1, 1}, {0, 0}),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), {}, {0, 1}, {0, 0}),
                  DimensionError);
}

TEST_CASE("conv_transpose2d places non-overlapping copies at stride 2") {
  auto y = conv_transpose2d(Tensor::full({1, 1, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), {},
                            {2, 2}, {0, 0});
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  for (double v : y.values()) CHECK(v == 1.0);
}

TEST_CASE("conv_transpose2d with a 1x1 kernel of value 2 doubles the input") {
  std::mt19937_64 rng(8);
  auto x = oracle::random_tensor({1, 1, 3, 4}, rng);
  auto y = conv_transpose2d(x, Tensor::full({1, 1, 1, 1}, 2.0), {}, {1, 1}, {0, 0});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(2 * x[i]).epsilon(1e-15));
}

TEST_CASE("conv_transpose2d is the input adjoint of conv2d") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    // Shapes chosen so that (H + 2p - k) is divisible by the stride.
    auto x = oracle::random_tensor({2, 3, 9, 7}, rng, true);
    auto k = oracle::random_tensor({4, 3, 3, 3}, rng);
    auto y = conv2d(x, k, {}, {2, 1}, {1, 1});
    auto g = oracle::random_tensor(y.shape(), rng);
    sum(y * g).backward();
    auto t = conv_transpose2d(g, k, {}, {2, 1}, {1, 1});
    REQUIRE(t.shape() == x.shape());
    CHECK(max_abs_diff(t.values(), {x.grad().begin(), x.grad().end()}) < 1e-12);

    // And the analytic adjoint agrees with finite differences.
    auto loss = [&] { return sum(conv2d(x, k, {}, {2, 1}, {1, 1}) * g); };
    CHECK(oracle::directional_check(loss, {x}, rng) < 1e-6);
  }
}

TEST_CASE("conv then transposed conv with the same geometry restores extents") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> ks(1, 4), st(1, 3), pd(0, 1), m(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t kh = ks(rng), kw = ks(rng), sh = st(rng), sw = st(rng);
    const std::size_t ph = pd(rng) * (kh > 1), pw = pd(rng) * (kw > 1);
    // H = s*(q) + k - 2p, which makes the forward division exact.
    const std::size_t h = sh * m(rng) + kh - 2 * ph, w = sw * m(rng) + kw - 2 * pw;
    auto x = Tensor::zeros({1, 1, h, w});
    auto k = Tensor::zeros({1, 1, kh, kw});
    auto y = conv_transpose2d(conv2d(x, k, {}, {sh, sw}, {ph, pw}), k, {}, {sh, sw}, {ph, pw});
    CHECK(y.shape() == x.shape());
  }
}

TEST_CASE("batch_norm train mode standardizes each channel") {
  std::mt19937_64 rng(4);
  auto x = Tensor::from({3, 2, 4, 5}, oracle::random_values(120, rng, -3, 7));
  BatchNormStats stats(2);
  auto y = batch_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}), stats, BatchNormMode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t p = 0; p < 20; ++p) {
        const double v = y[(n * 2 + c) * 20 + p];
        s += v;
        ss += v * v;
      }
    const double m = s / 60, var = ss / 60 - m * m;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
  CHECK(stats.mean[0] != 0.0);
}

TEST_CASE("batch_norm with gamma zero outputs beta") {
  std::mt19937_64 rng(6);
  auto x = oracle::random_tensor({2, 3, 2, 2}, rng);
  BatchNormStats stats(3);
  auto y = batch_norm(x, Tensor::zeros({3}), Tensor::from({3}, {0.5, -1.0, 2.0}), stats,
                      BatchNormMode::kTrain);
  const double beta[] = {0.5, -1.0, 2.0};
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 4; ++p) CHECK(y[(n * 3 + c) * 4 + p] == beta[c]);
}

TEST_CASE("batch_norm eval mode matches the scalar formula") {
  std::mt19937_64 rng(7);
  auto x = oracle::random_tensor({2, 2, 3, 3}, rng);
  BatchNormStats stats(2);
  stats.mean = {0.3, -0.2};
  stats.var = {1.7, 0.4};
  const std::vector<double> gamma{1.5, -0.5}, beta{0.1, 0.2};
  const double eps = 1e-5;
  auto y = batch_norm(x, Tensor::from({2}, gamma), Tensor::from({2}, beta), stats,
                      BatchNormMode::kEval, eps);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t p = 0; p < 9; ++p) {
        const std::size_t i = (n * 2 + c) * 9 + p;
        const double expect =
            (x[i] - stats.mean[c]) / std::sqrt(stats.var[c] + eps) * gamma[c] + beta[c];
        CHECK(std::abs(y[i] - expect) < 1e-14);
      }
}

TEST_CASE("batch_norm rejects a single value per channel in train mode") {
  BatchNormStats stats(2);
  CHECK_THROWS_AS(batch_norm(Tensor::zeros({1, 2, 1, 1}), Tensor::full({2}, 1.0),
                             Tensor::zeros({2}), stats, BatchNormMode::kTrain),
                  NumericError);
  CHECK_NOTHROW(batch_norm(Tensor::zeros({1, 2, 1, 1}), Tensor::full({2}, 1.0), Tensor::zeros({2}),
                           stats, BatchNormMode::kEval));
}

TEST_CASE("elu and softmax closed forms") {
  auto e = elu(Tensor::from({2}, {0.0, -1.0}));
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(e[1] == doctest::Approx(-0.6321).epsilon(1e-4));
  auto s = softmax(Tensor::from({2}, {0.0, 0.0}), 0);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
}

TEST_CASE("softmax rows sum to one even for huge logits") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = Tensor::from({3, 5, 2}, oracle::random_values(30, rng, -800, 800));
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto y = softmax(x, axis);
      const Shape& s = y.shape();
      // Sum along `axis` for every other index.
      std::vector<double> totals(30 / s[axis], 0.0);
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
      for (std::size_t i = axis + 1; i < 3; ++i) inner *= s[i];
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < s[axis]; ++k)
          for (std::size_t in = 0; in < inner; ++in) {
            const double v = y[(o * s[axis] + k) * inner + in];
            CHECK(v >= 0.0);
            totals[o * inner + in] += v;
          }
      for (double t : totals) CHECK(std::abs(t - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2}), 2), DimensionError);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> d(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = d(rng), k = d(rng), n = d(rng);
    auto a = oracle::random_values(m * k, rng), b = oracle::random_values(k * n, rng);
    auto c = matmul(Tensor::from({size_t(m), size_t(k)}, a), Tensor::from({size_t(k), size_t(n)}, b));
    CHECK(max_abs_diff(c.values(), oracle::matmul(a, b, m, k, n)) < 1e-12);
  }
  auto a = oracle::random_values(6, rng), b = oracle::random_values(6, rng);
  auto c = matmul(Tensor::from({2, 3}, a), Tensor::from({3, 2}, b));
  CHECK(max_abs_diff(c.values(), oracle::matmul(a, b, 2, 3, 2)) < 1e-12);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("batched matmul equals per-slice products") {
  std::mt19937_64 rng(13);
  auto a = oracle::random_values(3 * 2 * 4, rng), b = oracle::random_values(3 * 4 * 5, rng);
  auto c = matmul(Tensor::from({3, 2, 4}, a), Tensor::from({3, 4, 5}, b));
  for (int t = 0; t < 3; ++t) {
    std::vector<double> as(a.begin() + t * 8, a.begin() + (t + 1) * 8);
    std::vector<double> bs(b.begin() + t * 20, b.begin() + (t + 1) * 20);
    auto expect = oracle::matmul(as, bs, 2, 4, 5);
    for (int i = 0; i < 10; ++i) CHECK(std::abs(c[t * 10 + i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("concat, slice, permute and reshape move values as expected") {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto b = Tensor::from({2, 1}, {5, 6});
  auto c = concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 3});
  const double expect_c[] = {1, 2, 5, 3, 4, 6};
  for (int i = 0; i < 6; ++i) CHECK(c[i] == expect_c[i]);
  auto s = slice(c, 1, 1, 3);
  const double expect_s[] = {2, 5, 4, 6};
  for (int i = 0; i < 4; ++i) CHECK(s[i] == expect_s[i]);
  auto t = transpose(a);
  CHECK(t[1] == 3);
  auto p = permute(Tensor::from({1, 2, 3}, {0, 1, 2, 3, 4, 5}), {2, 0, 1});
  CHECK(p.shape() == Shape{3, 1, 2});
  const double expect_p[] = {0, 3, 1, 4, 2, 5};
  for (int i = 0; i < 6; ++i) CHECK(p[i] == expect_p[i]);
  CHECK_THROWS_AS(reshape(a, {3}), DimensionError);
  CHECK_THROWS_AS(concat({a, Tensor::zeros({3, 1})}, 1), DimensionError);
}

TEST_CASE("pooling ops") {
  auto c = max_pool2d(Tensor::full({1, 2, 4, 6}, 3.5), 2);
  CHECK(c.shape() == Shape{1, 2, 2, 3});
  for (double v : c.values()) CHECK(v == 3.5);
  auto m = max_pool2d(Tensor::from({1, 1, 2, 2}, {1, 4, 2, 3}), 2);
  CHECK(m[0] == 4);
  auto up = adaptive_avg_pool2d(Tensor::from({1, 1, 1, 2}, {1, 3}), 1, 4);
  const double expect_up[] = {1, 1, 3, 3};
  for (int i = 0; i < 4; ++i) CHECK(up[i] == expect_up[i]);
  auto down = adaptive_avg_pool2d(Tensor::from({1, 1, 1, 4}, {1, 3, 5, 7}), 1, 2);
  CHECK(down[0] == 2);
  CHECK(down[1] == 6);
}

TEST_CASE("lstm with all-zero weights and inputs emits zeros") {
  LstmWeights w{Tensor::zeros({12, 2}), Tensor::zeros({12, 3}), Tensor::zeros({12})};
  auto h = lstm_sequence(Tensor::zeros({4, 2, 2}), w);
  CHECK(h.shape() == Shape{4, 2, 3});
  for (double v : h.values()) CHECK(v == 0.0);
}

TEST_CASE("single-step lstm matches a hand-computed scalar cell") {
  // One unit, one feature: z = w_ih * x + w_hh * h0 + b per gate.
  const double x = 0.7, h0 = -0.3, c0 = 0.4;
  const double wi[] = {0.5, -0.2, 0.8, 0.1}, wh[] = {0.3, 0.6, -0.4, 0.9},
               b[] = {0.05, 1.0, -0.1, 0.2};
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(wi[0] * x + wh[0] * h0 + b[0]);
  const double f = sig(wi[1] * x + wh[1] * h0 + b[1]);
  const double g = std::tanh(wi[2] * x + wh[2] * h0 + b[2]);
  const double o = sig(wi[3] * x + wh[3] * h0 + b[3]);
  const double c1 = f * c0 + i * g;
  const double h1 = o * std::tanh(c1);
  LstmWeights w{Tensor::from({4, 1}, {wi[0], wi[1], wi[2], wi[3]}),
                Tensor::from({4, 1}, {wh[0], wh[1], wh[2], wh[3]}),
                Tensor::from({4}, {b[0], b[1], b[2], b[3]})};
  Tensor cell;
  auto h = lstm_sequence(Tensor::from({1, 1, 1}, {x}), w, Tensor::from({1, 1}, {h0}),
                         Tensor::from({1, 1}, {c0}), &cell);
  CHECK(std::abs(h.item() - h1) < 1e-15);
  CHECK(std::abs(cell.item() - c1) < 1e-15);
}

TEST_CASE("lstm matches the loop oracle on random shapes") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> d(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int steps = d(rng), batch = d(rng), feat = d(rng), hid = d(rng);
    auto x = oracle::random_values(steps * batch * feat, rng);
    auto wi = oracle::random_values(4 * hid * feat, rng);
    auto wh = oracle::random_values(4 * hid * hid, rng);
    auto b = oracle::random_values(4 * hid, rng);
    LstmWeights w{Tensor::from({size_t(4 * hid), size_t(feat)}, wi),
                  Tensor::from({size_t(4 * hid), size_t(hid)}, wh), Tensor::from({size_t(4 * hid)}, b)};
    auto out = lstm_sequence(Tensor::from({size_t(steps), size_t(batch), size_t(feat)}, x), w);
    double worst = 0.0;
    for (int n = 0; n < batch; ++n) {
      std::vector<double> h(hid, 0.0), c(hid, 0.0);
      for (int t = 0; t < steps; ++t) {
        std::vector<double> xt(x.begin() + (t * batch + n) * feat, x.begin() + (t * batch + n + 1) * feat);
        oracle::lstm_step(xt, h, c, wi, wh, b, feat, hid);
        for (int q = 0; q < hid; ++q) worst = std::max(worst, std::abs(out[(t * batch + n) * hid + q] - h[q]));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("lstm with saturated forget gate carries the cell state") {
  const std::size_t hid = 3;
  std::vector<double> bias(4 * hid, 0.0);
  for (std::size_t q = 0; q < hid; ++q) bias[hid + q] = 10.0;
  LstmWeights w{Tensor::zeros({4 * hid, 2}), Tensor::zeros({4 * hid, hid}), Tensor::from({4 * hid}, bias)};
  const std::vector<double> c0{0.5, -0.8, 0.2};
  Tensor cell;
  std::mt19937_64 rng(1);
  lstm_sequence(oracle::random_tensor({20, 1, 2}, rng), w, {}, Tensor::from({1, hid}, c0), &cell);
  for (std::size_t q = 0; q < hid; ++q) CHECK(std::abs(cell[q] - c0[q]) < 1e-3);
}

TEST_CASE("backward of sum and of a square") {
  std::mt19937_64 rng(14);
  auto x = oracle::random_tensor({3, 4}, rng, true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  sum(x * x).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x[i]).epsilon(1e-15));
}

TEST_CASE("backward contract errors") {
  auto x = Tensor::full({2}, 1.0, true);
  CHECK_THROWS_AS((x * x).backward(), ContractError);
  auto loss = sum(x * x);
  loss.backward();
  CHECK_THROWS_AS(loss.backward(), ContractError);
  CHECK_THROWS_AS(sum(Tensor::zeros({2})).backward(), ContractError);
  // Reusing a consumed intermediate is also rejected.
  auto h = x * x;
  sum(h).backward();
  CHECK_THROWS_AS(sum(h + x).backward(), ContractError);
}

TEST_CASE("non-finite results are surfaced as NumericError") {
  auto x = Tensor::from({1}, {1e300});
  CHECK_THROWS_AS(x * x, NumericError);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0}), DimensionError);
}

TEST_CASE("every differentiable op passes a directional derivative check") {
  std::mt19937_64 rng(99);
  auto a = oracle::random_tensor({2, 3, 4, 5}, rng, true);
  auto b = oracle::random_tensor({2, 3, 4, 5}, rng, true);
  auto w = oracle::random_tensor({2, 3, 4, 5}, rng);
  auto s = Tensor::scalar(0.7, true);
  auto weigh = [&](const Tensor& t) { return sum(t * w); };
  CHECK(oracle::directional_check([&] { return weigh(add(a, b)); }, {a, b}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(sub(a, b)); }, {a, b}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(mul(a, b)); }, {a, b}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(scale_by(a, s)); }, {a, s}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(elu(a)); }, {a}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(sigmoid(a)); }, {a}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(tanh(a)); }, {a}, rng) < 1e-4);
  for (std::size_t axis = 0; axis < 4; ++axis) {
    CHECK(oracle::directional_check([&] { return weigh(softmax(a, axis)); }, {a}, rng) < 1e-4);
  }
  auto m1 = oracle::random_tensor({3, 4, 2}, rng, true), m2 = oracle::random_tensor({3, 2, 5}, rng, true);
  auto mw = oracle::random_tensor({3, 4, 5}, rng);
  CHECK(oracle::directional_check([&] { return sum(matmul(m1, m2) * mw); }, {m1, m2}, rng) < 1e-4);
  auto lx = oracle::random_tensor({6, 4}, rng, true), lw = oracle::random_tensor({3, 4}, rng, true),
       lb = oracle::random_tensor({3}, rng, true), lo = oracle::random_tensor({6, 3}, rng);
  CHECK(oracle::directional_check([&] { return sum(linear(lx, lw, lb) * lo); }, {lx, lw, lb}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return sum(permute(a, {3, 0, 2, 1}) * permute(w, {3, 0, 2, 1})); }, {a}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return sum(transpose(a) * transpose(w)); }, {a}, rng) < 1e-4);
  auto cw = oracle::random_tensor({2, 6, 4, 5}, rng);
  CHECK(oracle::directional_check([&] { return sum(concat({a, b}, 1) * cw); }, {a, b}, rng) < 1e-4);
  auto sw = oracle::random_tensor({2, 3, 2, 5}, rng);
  CHECK(oracle::directional_check([&] { return sum(slice(a, 2, 1, 3) * sw); }, {a}, rng) < 1e-4);
  auto k = oracle::random_tensor({4, 3, 3, 2}, rng, true), kb = oracle::random_tensor({4}, rng, true);
  auto conv_w = oracle::random_tensor({2, 4, 2, 4}, rng);
  CHECK(oracle::directional_check([&] { return sum(conv2d(a, k, kb, {2, 1}, {1, 0}) * conv_w); }, {a, k, kb}, rng) < 1e-4);
  auto dk = oracle::random_tensor({3, 2, 4, 3}, rng, true), db = oracle::random_tensor({2}, rng, true);
  auto dec = conv_transpose2d(a, dk, db, {2, 1}, {1, 1});
  auto dec_w = oracle::random_tensor(dec.shape(), rng);
  CHECK(oracle::directional_check([&] { return sum(conv_transpose2d(a, dk, db, {2, 1}, {1, 1}) * dec_w); }, {a, dk, db}, rng) < 1e-4);
  auto mp_w = oracle::random_tensor({2, 3, 2, 2}, rng);
  CHECK(oracle::directional_check([&] { return sum(max_pool2d(a, 2) * mp_w); }, {a}, rng) < 1e-4);
  auto ap_w = oracle::random_tensor({2, 3, 3, 7}, rng);
  CHECK(oracle::directional_check([&] { return sum(adaptive_avg_pool2d(a, 3, 7) * ap_w); }, {a}, rng) < 1e-4);
  auto gamma = oracle::random_tensor({3}, rng, true), beta = oracle::random_tensor({3}, rng, true);
  BatchNormStats stats(3);
  CHECK(oracle::directional_check([&] { return weigh(batch_norm(a, gamma, beta, stats, BatchNormMode::kTrain)); }, {a, gamma, beta}, rng) < 1e-4);
  CHECK(oracle::directional_check([&] { return weigh(batch_norm(a, gamma, beta, stats, BatchNormMode::kEval)); }, {a, gamma, beta}, rng) < 1e-4);
  LstmWeights lw8{oracle::random_tensor({8, 3}, rng, true), oracle::random_tensor({8, 2}, rng, true),
                  oracle::random_tensor({8}, rng, true)};
  auto seq = oracle::random_tensor({5, 2, 3}, rng, true);
  auto h0 = oracle::random_tensor({2, 2}, rng, true);
  auto lstm_w = oracle::random_tensor({5, 2, 2}, rng);
  CHECK(oracle::directional_check([&] { return sum(lstm_sequence(seq, lw8, h0) * lstm_w); },
                                  {seq, lw8.w_ih, lw8.w_hh, lw8.bias, h0}, rng) < 1e-4);
}
