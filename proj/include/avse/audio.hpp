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

#ifndef AVSE_AUDIO_HPP_
#define AVSE_AUDIO_HPP_

#include <complex>
#include <cstddef>
#include <random>
#include <vector>

#include "avse/matrix.hpp"

namespace avse {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameLength = 640;  // 40 ms
inline constexpr std::size_t kHop = 160;          // 10 ms
inline constexpr std::size_t kFftBins = kFrameLength / 2 + 1;
inline constexpr std::size_t kMelBands = 80;
inline constexpr std::size_t kChunkFrames = 20;  // 200 ms
inline constexpr double kMelFmin = 0.0;
inline constexpr double kMelFmax = 8000.0;
inline constexpr double kLogFloor = 1e-10;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// One-sided STFT, stored frame-major: bins[frame * kFftBins + bin].
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(std::size_t bin, std::size_t frame) { return bins[frame * kFftBins + bin]; }
  std::complex<double> at(std::size_t bin, std::size_t frame) const {
    return bins[frame * kFftBins + bin];
  }
};

/// Which spectral quantity is fed to the Mel filterbank.
enum class SpectralScale { kPower, kMagnitude };

/// 80 x 321 triangular filters, 0 to 8 kHz, centers uniform on the HTK Mel scale.
struct MelFilterbank {
  Matrix weights;
  std::vector<double> edges_hz;  // 82 points: filter k spans edges[k]..edges[k+2]
};

/// An 80 x 20 network input/target. Columns at or beyond `valid_frames` are zero.
struct LogMelChunk {
  Matrix matrix{kMelBands, kChunkFrames};
  std::size_t valid_frames = kChunkFrames;

  double duration_s() const { return static_cast<double>(kChunkFrames * kHop) / kSampleRate; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic Hann window of length kFrameLength.
const std::vector<double>& hann_window();

/// Number of STFT frames for a signal of `samples` samples (0 if too short).
std::size_t frame_count(std::size_t samples);

ComplexSpectrogram stft(const Waveform& w);
/// Floor applied to the squared-window sum in istft.
extern const double kIstftNormFloor;

/// Weighted overlap-add inverse: sum_t w * ifft(S_t) / max(sum_t w^2, floor).
/// Output has (frames - 1) * hop + 640 samples.
Waveform istft(const ComplexSpectrogram& s);

const MelFilterbank& mel_filterbank();
/// ln(fb * |S|^2 + 1e-10), shape 80 x T (|S| instead of |S|^2 for kMagnitude).
Matrix log_mel(const ComplexSpectrogram& s, SpectralScale scale = SpectralScale::kPower);
/// Shorthand for log_mel(stft(w)).
Matrix log_mel(const Waveform& w, SpectralScale scale = SpectralScale::kPower);

/// Splits the frame axis into consecutive 20-frame chunks, zero-padding the last.
std::vector<LogMelChunk> chunk(const Matrix& log_mel);
/// Concatenates the valid columns of `chunks`.
Matrix assemble(const std::vector<LogMelChunk>& chunks);

double mean_power(const std::vector<double>& x);
/// Gain g such that clean + g * noise has the requested SNR.
double mixing_gain(double clean_power, double noise_power, double snr_db);
/// Crops (random offset) or tiles `noise` to `length` samples.
std::vector<double> fit_length(const std::vector<double>& noise, std::size_t length,
                               std::mt19937_64& rng);
/// clean + g * noise at exactly `snr_db`. `scaled_noise`, when given, receives g * noise.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                    std::mt19937_64& rng, std::vector<double>* scaled_noise = nullptr);

/// Waveform from a predicted log-Mel matrix using the filterbank pseudo-inverse
/// (clamped at zero) for magnitudes and the phase of `phase_source`.
Waveform mel_invert(const Matrix& predicted, const ComplexSpectrogram& phase_source,
                    SpectralScale scale = SpectralScale::kPower);

}  // namespace avse

#endif  // AVSE_AUDIO_HPP_
