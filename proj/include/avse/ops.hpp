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

#ifndef AVSE_OPS_HPP_
#define AVSE_OPS_HPP_

#include <cstddef>
#include <vector>

#include "avse/tensor.hpp"

namespace avse {

struct Size2 {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Elementwise. Operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x * s where s is a one-element tensor (a learnable scalar).
Tensor scale_by(const Tensor& x, const Tensor& s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// ELU with alpha = 1.
Tensor elu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// [M,K]x[K,N] -> [M,N], or batched [B,M,K]x[B,K,N] -> [B,M,N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& x);
/// x[M,K] * w[O,K]^T + b[O] -> [M,O]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Cross-correlation. input [N,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout]
/// (may be undefined). Output extent floor((H + 2p - k) / s) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Size2 stride,
              Size2 padding);

/// Adjoint of conv2d w.r.t. its input. input [N,Cin,H,W], kernel
/// [Cin,Cout,kh,kw]. Output extent (H - 1) * s - 2p + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        Size2 stride, Size2 padding);

/// Non-overlapping k x k max pooling (trailing rows/columns dropped).
Tensor max_pool2d(const Tensor& input, std::size_t k);

/// While alive, collects the branch taken by every non-smooth op on this
/// thread: max_pool2d argmax picks and the negative inputs of elu. Two
/// evaluations with different logs straddle a kink.
class BranchLog {
 public:
  BranchLog();
  ~BranchLog();
  BranchLog(const BranchLog&) = delete;
  BranchLog& operator=(const BranchLog&) = delete;

  const std::vector<std::size_t>& branches() const { return branches_; }

  static bool active();
  static void note(const std::vector<std::size_t>& picks);

 private:
  std::vector<std::size_t> branches_;
  BranchLog* previous_;
};

/// Averages bins [floor(i*in/out), ceil((i+1)*in/out)) per output cell.
Tensor adaptive_avg_pool2d(const Tensor& input, std::size_t out_h, std::size_t out_w);

enum class BatchNormMode { kTrain, kEval };

/// Running statistics owned by a batch-norm layer.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;

  explicit BatchNormStats(std::size_t channels = 0) : mean(channels, 0.0), var(channels, 1.0) {}
};

/// Per-channel normalization over (N, H, W) of an [N,C,H,W] tensor (rank 2
/// [N,C] is accepted too). In train mode the running stats are updated with
/// `momentum` using the unbiased batch variance.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, BatchNormMode mode, double eps = 1e-5,
                  double momentum = 0.1);

struct LstmWeights {
  Tensor w_ih;  // [4H, F], gate order i, f, g, o
  Tensor w_hh;  // [4H, H]
  Tensor bias;  // [4H]
};

/// Runs an LSTM over input [T,N,F] from (h0, c0) of shape [N,H] and returns
/// the hidden sequence [T,N,H]. Undefined h0/c0 mean zeros.
Tensor lstm_sequence(const Tensor& input, const LstmWeights& weights, const Tensor& h0 = {},
                     const Tensor& c0 = {}, Tensor* final_cell = nullptr);

}  // namespace avse

#endif  // AVSE_OPS_HPP_
