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

#include "avse/audio.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avse/error.hpp"
#include "fft.hpp"

namespace avse {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const std::vector<double>& hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kFrameLength);
    for (std::size_t n = 0; n < kFrameLength; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                  static_cast<double>(kFrameLength));
    }
    return w;
  }();
  return window;
}

std::size_t frame_count(std::size_t samples) {
  if (samples < kFrameLength) return 0;
  return 1 + (samples - kFrameLength) / kHop;
}

ComplexSpectrogram stft(const Waveform& w) {
  if (w.sample_rate != kSampleRate) {
    throw FormatError("stft: sample rate must be " + std::to_string(kSampleRate) + " Hz, got " +
                      std::to_string(w.sample_rate));
  }
  if (w.samples.size() < kFrameLength) {
    throw DimensionError("stft: input has " + std::to_string(w.samples.size()) +
                         " samples, at least " + std::to_string(kFrameLength) + " are required");
  }
  const auto& fft = detail::real_fft(kFrameLength);
  const auto& window = hann_window();
  ComplexSpectrogram s;
  s.frames = frame_count(w.samples.size());
  s.bins.resize(s.frames * kFftBins);
  std::vector<double> frame(kFrameLength);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double* src = w.samples.data() + t * kHop;
    for (std::size_t n = 0; n < kFrameLength; ++n) frame[n] = src[n] * window[n];
    fft.forward(frame.data(), s.bins.data() + t * kFftBins);
  }
  return s;
}

const double kIstftNormFloor = 0.1;

Waveform istft(const ComplexSpectrogram& s) {
  Waveform out;
  if (s.frames == 0) return out;
  const auto& fft = detail::real_fft(kFrameLength);
  const auto& window = hann_window();
  const std::size_t length = (s.frames - 1) * kHop + kFrameLength;
  out.samples.assign(length, 0.0);
  std::vector<double> norm(length, 0.0);
  std::vector<double> frame(kFrameLength);
  const double inv_n = 1.0 / static_cast<double>(kFrameLength);
  for (std::size_t t = 0; t < s.frames; ++t) {
    fft.inverse(s.bins.data() + t * kFftBins, frame.data());
    for (std::size_t n = 0; n < kFrameLength; ++n) {
      out.samples[t * kHop + n] += frame[n] * inv_n * window[n];
      norm[t * kHop + n] += window[n] * window[n];
    }
  }
  // Edge samples covered only by a window tail would be amplified without bound
  // for modified spectrograms; their normalizer is floored instead.
  for (std::size_t i = 0; i < length; ++i) out.samples[i] /= std::max(norm[i], kIstftNormFloor);
  return out;
}

const MelFilterbank& mel_filterbank() {
  static const MelFilterbank fb = [] {
    MelFilterbank f;
    f.weights = Matrix(kMelBands, kFftBins);
    const double lo = hz_to_mel(kMelFmin), hi = hz_to_mel(kMelFmax);
    f.edges_hz.resize(kMelBands + 2);
    for (std::size_t k = 0; k < kMelBands + 2; ++k) {
      f.edges_hz[k] = mel_to_hz(lo + (hi - lo) * static_cast<double>(k) / (kMelBands + 1));
    }
    f.edges_hz.front() = kMelFmin;
    f.edges_hz.back() = kMelFmax;
    const double bin_hz = static_cast<double>(kSampleRate) / kFrameLength;
    for (std::size_t m = 0; m < kMelBands; ++m) {
      const double left = f.edges_hz[m], center = f.edges_hz[m + 1], right = f.edges_hz[m + 2];
      for (std::size_t b = 0; b < kFftBins; ++b) {
        const double hz = bin_hz * static_cast<double>(b);
        const double up = (hz - left) / (center - left);
        const double down = (right - hz) / (right - center);
        f.weights(m, b) = std::max(0.0, std::min(up, down));
      }
    }
    return f;
  }();
  return fb;
}

Matrix log_mel(const ComplexSpectrogram& s, SpectralScale scale) {
  const auto& fb = mel_filterbank().weights;
  Matrix out(kMelBands, s.frames);
  std::vector<double> spec(kFftBins);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t b = 0; b < kFftBins; ++b) {
      const double p = std::norm(s.at(b, t));
      spec[b] = scale == SpectralScale::kPower ? p : std::sqrt(p);
    }
    for (std::size_t m = 0; m < kMelBands; ++m) {
      double acc = 0.0;
      for (std::size_t b = 0; b < kFftBins; ++b) acc += fb(m, b) * spec[b];
      out(m, t) = std::log(acc + kLogFloor);
    }
  }
  return out;
}

Matrix log_mel(const Waveform& w, SpectralScale scale) { return log_mel(stft(w), scale); }

std::vector<LogMelChunk> chunk(const Matrix& m) {
  if (m.rows != kMelBands) {
    throw DimensionError("chunk: expected " + std::to_string(kMelBands) + " Mel rows, got " +
                         std::to_string(m.rows));
  }
  if (m.cols == 0) throw DimensionError("chunk: matrix has no frames");
  std::vector<LogMelChunk> chunks;
  for (std::size_t start = 0; start < m.cols; start += kChunkFrames) {
    LogMelChunk c;
    c.valid_frames = std::min(kChunkFrames, m.cols - start);
    for (std::size_t r = 0; r < kMelBands; ++r) {
      for (std::size_t t = 0; t < c.valid_frames; ++t) c.matrix(r, t) = m(r, start + t);
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

Matrix assemble(const std::vector<LogMelChunk>& chunks) {
  std::size_t total = 0;
  for (const auto& c : chunks) total += c.valid_frames;
  Matrix out(kMelBands, total);
  std::size_t col = 0;
  for (const auto& c : chunks) {
    for (std::size_t r = 0; r < kMelBands; ++r) {
      for (std::size_t t = 0; t < c.valid_frames; ++t) out(r, col + t) = c.matrix(r, t);
    }
    col += c.valid_frames;
  }
  return out;
}

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double mixing_gain(double clean_power, double noise_power, double snr_db) {
  if (!(clean_power > 0.0) || !(noise_power > 0.0)) {
    throw NumericError("mix_at_snr: degenerate signal, clean power " +
                       std::to_string(clean_power) + ", noise power " +
                       std::to_string(noise_power));
  }
  return std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

std::vector<double> fit_length(const std::vector<double>& noise, std::size_t length,
                               std::mt19937_64& rng) {
  if (noise.empty()) throw NumericError("mix_at_snr: empty noise signal");
  std::vector<double> out(length);
  if (noise.size() >= length) {
    std::uniform_int_distribution<std::size_t> pick(0, noise.size() - length);
    const std::size_t offset = pick(rng);
    std::copy_n(noise.begin() + static_cast<std::ptrdiff_t>(offset), length, out.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i) out[i] = noise[i % noise.size()];
  }
  return out;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                    std::mt19937_64& rng, std::vector<double>* scaled_noise) {
  const auto fitted = fit_length(noise.samples, clean.samples.size(), rng);
  const double g = mixing_gain(mean_power(clean.samples), mean_power(fitted), snr_db);
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(clean.samples.size());
  if (scaled_noise) scaled_noise->resize(fitted.size());
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const double n = g * fitted[i];
    out.samples[i] = clean.samples[i] + n;
    if (scaled_noise) (*scaled_noise)[i] = n;
  }
  return out;
}

namespace {

// Minimum-norm pseudo-inverse of the 80 x 321 filterbank, 321 x 80.
const Eigen::MatrixXd& filterbank_pinv() {
  static const Eigen::MatrixXd pinv = [] {
    const auto& w = mel_filterbank().weights;
    Eigen::MatrixXd fb(w.rows, w.cols);
    for (std::size_t r = 0; r < w.rows; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) fb(r, c) = w(r, c);
    }
    return Eigen::MatrixXd(fb.completeOrthogonalDecomposition().pseudoInverse());
  }();
  return pinv;
}

}  // namespace

Waveform mel_invert(const Matrix& predicted, const ComplexSpectrogram& phase_source,
                    SpectralScale scale) {
  if (predicted.rows != kMelBands || predicted.cols != phase_source.frames) {
    throw DimensionError("mel_invert: log-Mel is " + std::to_string(predicted.rows) + "x" +
                         std::to_string(predicted.cols) + " but phase source has " +
                         std::to_string(phase_source.frames) + " frames");
  }
  const auto& pinv = filterbank_pinv();
  ComplexSpectrogram out;
  out.frames = predicted.cols;
  out.bins.resize(out.frames * kFftBins);
  Eigen::VectorXd mel(kMelBands);
  for (std::size_t t = 0; t < out.frames; ++t) {
    // Exact inverse of ln(x + floor).
    for (std::size_t m = 0; m < kMelBands; ++m) {
      mel(static_cast<Eigen::Index>(m)) = std::max(0.0, std::exp(predicted(m, t)) - kLogFloor);
    }
    const Eigen::VectorXd linear = pinv * mel;
    for (std::size_t b = 0; b < kFftBins; ++b) {
      const double v = std::max(0.0, linear(static_cast<Eigen::Index>(b)));
      const double magnitude = scale == SpectralScale::kPower ? std::sqrt(v) : v;
      const std::complex<double> ph = phase_source.at(b, t);
      const double r = std::abs(ph);
      out.at(b, t) = r > 0.0 ? magnitude * (ph / r) : std::complex<double>(magnitude, 0.0);
    }
  }
  return istft(out);
}

}  // namespace avse
