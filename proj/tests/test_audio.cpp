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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "avse/audio.hpp"
#include "avse/error.hpp"
#include "avse/wav.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avse;

namespace {

Waveform sine(double hz, double seconds, double amp = 1.0) {
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * kSampleRate));
  for (std::size_t n = 0; n < w.samples.size(); ++n) {
    w.samples[n] = amp * std::sin(2.0 * std::numbers::pi * hz * double(n) / kSampleRate);
  }
  return w;
}

Waveform noise(std::size_t n, std::mt19937_64& rng, double sd = 0.1) {
  std::normal_distribution<double> g(0.0, sd);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = g(rng);
  return w;
}

}  // namespace

TEST_CASE("stft of a 1 kHz sine peaks at bin 40 in every frame") {
  auto s = stft(sine(1000.0, 1.0));
  CHECK(s.frames == frame_count(16000));
  for (std::size_t t = 0; t < s.frames; ++t) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < kFftBins; ++b) {
      if (std::abs(s.at(b, t)) > std::abs(s.at(best, t))) best = b;
    }
    CHECK(best == 40);
  }
}

TEST_CASE("stft frames equal a direct DFT of the Hann-windowed segment") {
  std::mt19937_64 rng(5);
  auto w = noise(1200, rng);
  auto s = stft(w);
  const auto& window = hann_window();
  for (std::size_t t : {std::size_t{0}, std::size_t{3}}) {
    std::vector<double> seg(kFrameLength);
    for (std::size_t n = 0; n < kFrameLength; ++n) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(n) / double(kFrameLength));
      CHECK(std::abs(window[n] - hann) < 1e-15);
      seg[n] = w.samples[t * kHop + n] * hann;
    }
    auto expect = oracle::dft(seg);
    double worst = 0.0;
    for (std::size_t b = 0; b < kFftBins; ++b) worst = std::max(worst, std::abs(expect[b] - s.at(b, t)));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("stft framing and edge cases") {
  Waveform zero;
  zero.samples.assign(4000, 0.0);
  for (auto v : stft(zero).bins) CHECK(v == std::complex<double>(0.0, 0.0));
  Waveform w800;
  w800.samples.assign(800, 0.1);
  CHECK(stft(w800).frames == 2);
  Waveform shorty;
  shorty.samples.assign(639, 0.0);
  CHECK_THROWS_WITH_AS(stft(shorty), doctest::Contains("640"), DimensionError);
}

TEST_CASE("istft inverts stft on interior samples") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = noise(16000, rng, 0.3);
    auto y = istft(stft(x));
    double worst = 0.0;
    for (std::size_t i = kFrameLength; i + kFrameLength < x.samples.size(); ++i) {
      worst = std::max(worst, std::abs(x.samples[i] - y.samples[i]));
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("istft of zeros is silent and single frames follow the overlap-add formula") {
  ComplexSpectrogram z;
  z.frames = 3;
  z.bins.assign(3 * kFftBins, 0.0);
  for (double v : istft(z).samples) CHECK(v == 0.0);

  // One frame of a DC signal: ifft gives w[n], overlap-add multiplies by w[n]
  // and divides by max(w[n]^2, floor).
  Waveform dc;
  dc.samples.assign(kFrameLength, 1.0);
  auto y = istft(stft(dc));
  REQUIRE(y.samples.size() == kFrameLength);
  const auto& w = hann_window();
  for (std::size_t n = 0; n < kFrameLength; ++n) {
    const double expect = w[n] * w[n] / std::max(w[n] * w[n], kIstftNormFloor);
    CHECK(std::abs(y.samples[n] - expect) < 1e-12);
  }
  CHECK(y.samples[0] == 0.0);
  CHECK(std::abs(y.samples[320] - 1.0) < 1e-12);
}

TEST_CASE("mel filterbank construction") {
  const auto& fb = mel_filterbank();
  REQUIRE(fb.weights.rows == 80);
  REQUIRE(fb.weights.cols == 321);
  CHECK(fb.edges_hz.front() == 0.0);
  CHECK(fb.edges_hz.back() == 8000.0);
  for (std::size_t k = 1; k < fb.edges_hz.size(); ++k) CHECK(fb.edges_hz[k] > fb.edges_hz[k - 1]);
  // Centers uniform on the Mel scale.
  const double step = hz_to_mel(8000.0) / 81.0;
  for (std::size_t k = 0; k < fb.edges_hz.size(); ++k) {
    CHECK(std::abs(hz_to_mel(fb.edges_hz[k]) - step * double(k)) < 1e-9);
  }
  for (std::size_t m = 0; m < 80; ++m) {
    // Nonnegative, unimodal, nonzero.
    double peak = 0.0;
    int direction_changes = 0;
    bool rising = true;
    for (std::size_t b = 0; b < 321; ++b) {
      const double v = fb.weights(m, b);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      peak = std::max(peak, v);
      if (b > 0) {
        const double prev = fb.weights(m, b - 1);
        if (rising && v < prev) {
          rising = false;
          ++direction_changes;
        } else if (!rising && v > prev) {
          ++direction_changes;
        }
      }
    }
    CHECK(peak > 0.0);
    CHECK(direction_changes <= 1);
  }
  for (std::size_t b = 1; b < 320; ++b) {
    double total = 0.0;
    for (std::size_t m = 0; m < 80; ++m) total += fb.weights(m, b);
    CHECK(total > 0.0);
  }
}

TEST_CASE("log-mel of silence is the log floor") {
  ComplexSpectrogram z;
  z.frames = 4;
  z.bins.assign(4 * kFftBins, 0.0);
  auto m = log_mel(z);
  CHECK(m.rows == 80);
  CHECK(m.cols == 4);
  for (double v : m.data) CHECK(v == std::log(kLogFloor));
}

TEST_CASE("white noise gives comparable energy in adjacent Mel bands") {
  std::mt19937_64 rng(23);
  std::vector<double> diff_db(79, 0.0);
  for (int draw = 0; draw < 100; ++draw) {
    auto m = log_mel(noise(4000, rng));
    for (std::size_t k = 0; k + 1 < 80; ++k) {
      double acc = 0.0;
      for (std::size_t t = 0; t < m.cols; ++t) acc += std::abs(m(k, t) - m(k + 1, t));
      diff_db[k] += 10.0 / std::log(10.0) * acc / double(m.cols) / 100.0;
    }
  }
  for (std::size_t k = 0; k < 79; ++k) CHECK_MESSAGE(diff_db[k] < 6.0, "bands " << k << "," << k + 1);
}

TEST_CASE("log-mel is monotone in spectral power") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = stft(noise(2000, rng));
    auto louder = s;
    for (auto& v : louder.bins) v *= u(rng);
    auto a = log_mel(s), b = log_mel(louder);
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(b.data[i] >= a.data[i]);
  }
}

TEST_CASE("chunking splits the frame axis into 20-frame pieces") {
  Matrix m20(80, 20, 1.0);
  auto c20 = chunk(m20);
  REQUIRE(c20.size() == 1);
  CHECK(c20[0].valid_frames == 20);

  std::mt19937_64 rng(31);
  Matrix m45(80, 45);
  for (auto& v : m45.data) v = std::uniform_real_distribution<double>(-5, 5)(rng);
  auto c45 = chunk(m45);
  REQUIRE(c45.size() == 3);
  CHECK(c45[0].valid_frames == 20);
  CHECK(c45[1].valid_frames == 20);
  CHECK(c45[2].valid_frames == 5);
  for (std::size_t r = 0; r < 80; ++r)
    for (std::size_t t = 5; t < 20; ++t) CHECK(c45[2].matrix(r, t) == 0.0);
  CHECK(c45[0].duration_s() == doctest::Approx(0.2));

  for (std::size_t cols : {1, 19, 21, 40, 77, 100}) {
    Matrix m(80, cols);
    for (auto& v : m.data) v = std::uniform_real_distribution<double>(-5, 5)(rng);
    CHECK(assemble(chunk(m)) == m);
  }
  CHECK_THROWS_AS(chunk(Matrix(79, 20)), DimensionError);
}

TEST_CASE("mixing gain closed forms") {
  CHECK(mixing_gain(1.0, 1.0, 0.0) == 1.0);
  CHECK(mixing_gain(1.0, 1.0, 10.0) == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-15));
  CHECK(mixing_gain(1.0, 1.0, 10.0) == doctest::Approx(0.3162).epsilon(1e-4));
  CHECK_THROWS_AS(mixing_gain(0.0, 1.0, 0.0), NumericError);
  CHECK_THROWS_AS(mixing_gain(1.0, 0.0, 0.0), NumericError);
}

TEST_CASE("mix_at_snr hits the requested SNR") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> snr(-10.0, 10.0);
  std::uniform_int_distribution<std::size_t> len(1000, 30000);
  for (int trial = 0; trial < 50; ++trial) {
    auto clean = noise(len(rng), rng, 0.2);
    auto n = noise(len(rng), rng, 0.05);
    const double target = snr(rng);
    std::vector<double> scaled;
    auto mix = mix_at_snr(clean, n, target, rng, &scaled);
    REQUIRE(mix.samples.size() == clean.samples.size());
    std::vector<double> residual(mix.samples.size());
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = mix.samples[i] - clean.samples[i];
    const double measured = 10.0 * std::log10(mean_power(clean.samples) / mean_power(residual));
    CHECK(std::abs(measured - target) < 1e-9);
    const double exact = 10.0 * std::log10(mean_power(clean.samples) / mean_power(scaled));
    CHECK(std::abs(exact - target) < 1e-9);
  }
  Waveform silent;
  silent.samples.assign(100, 0.0);
  CHECK_THROWS_AS(mix_at_snr(silent, noise(100, rng), 0.0, rng), NumericError);
}

TEST_CASE("fit_length tiles short noise and crops long noise") {
  std::mt19937_64 rng(41);
  auto tiled = fit_length({1, 2, 3}, 7, rng);
  const double expect[] = {1, 2, 3, 1, 2, 3, 1};
  for (int i = 0; i < 7; ++i) CHECK(tiled[i] == expect[i]);
  std::vector<double> ramp(100);
  for (int i = 0; i < 100; ++i) ramp[i] = i;
  auto cropped = fit_length(ramp, 10, rng);
  for (int i = 1; i < 10; ++i) CHECK(cropped[i] == cropped[0] + i);
}

TEST_CASE("mel inversion of a clean AR(1) signal keeps SI-SDR above 10 dB") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    Waveform x;
    x.samples = oracle::ar1(16000, 0.9, rng);
    auto s = stft(x);
    auto y = mel_invert(log_mel(s), s);
    std::vector<double> ref(x.samples.begin(), x.samples.begin() + y.samples.size());
    CHECK(oracle::si_sdr(ref, y.samples) >= 10.0);
  }
}

TEST_CASE("mel inversion of the log floor is silent and scales with sqrt of power") {
  std::mt19937_64 rng(47);
  Waveform x;
  x.samples = oracle::ar1(8000, 0.8, rng);
  auto s = stft(x);
  auto silent = mel_invert(Matrix(80, s.frames, std::log(kLogFloor)), s);
  double peak = 0.0;
  for (double v : silent.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak < 1e-4);

  auto lm = log_mel(s);
  auto doubled = lm;
  for (auto& v : doubled.data) v = std::log(2.0 * (std::exp(v) - kLogFloor) + kLogFloor);
  auto a = mel_invert(lm, s), b = mel_invert(doubled, s);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(std::abs(b.samples[i] - std::sqrt(2.0) * a.samples[i]) < 1e-9);
  }
  CHECK_THROWS_AS(mel_invert(Matrix(80, s.frames + 1), s), DimensionError);
}

TEST_CASE("WAV files round-trip and foreign formats are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "avse_test_wav";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(53);
  auto w = noise(1234, rng, 0.2);
  for (auto& v : w.samples) v = std::round(v * 32768.0) / 32768.0;
  write_wav(dir / "a.wav", w);
  auto r = read_wav(dir / "a.wav");
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(r.samples[i] == w.samples[i]);

  // Patch the header to claim stereo, then 44.1 kHz.
  auto patch = [&](std::size_t offset, std::uint32_t value, int width) {
    std::fstream f(dir / "b.wav", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    for (int i = 0; i < width; ++i) f.put(static_cast<char>((value >> (8 * i)) & 0xff));
  };
  std::filesystem::copy_file(dir / "a.wav", dir / "b.wav", std::filesystem::copy_options::overwrite_existing);
  patch(22, 2, 2);
  CHECK_THROWS_WITH_AS(read_wav(dir / "b.wav"), doctest::Contains("channel"), FormatError);
  std::filesystem::copy_file(dir / "a.wav", dir / "b.wav", std::filesystem::copy_options::overwrite_existing);
  patch(24, 44100, 4);
  CHECK_THROWS_WITH_AS(read_wav(dir / "b.wav"), doctest::Contains("16000"), FormatError);
  std::ofstream(dir / "c.wav") << "garbage";
  CHECK_THROWS_AS(read_wav(dir / "c.wav"), FormatError);
  std::filesystem::remove_all(dir);
}
