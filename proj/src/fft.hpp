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

#ifndef AVSE_SRC_FFT_HPP_
#define AVSE_SRC_FFT_HPP_

#include <complex>
#include <cstddef>
#include <vector>

namespace avse::detail {

/// Real-input FFT of a fixed length backed by FFTW. Instances are shared
/// and immutable; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  /// n real samples -> n/2 + 1 bins.
  void forward(const double* in, std::complex<double>* out) const;
  /// n/2 + 1 bins -> n samples, unnormalized (scaled by n).
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

/// Cached transform for length n.
const RealFft& real_fft(std::size_t n);

}  // namespace avse::detail

#endif  // AVSE_SRC_FFT_HPP_
