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

#include "avse/video.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "avse/error.hpp"
#include "avse/file_io.hpp"

namespace avse {

namespace {

constexpr char kMagic[5] = {'A', 'V', 'S', 'G', '1'};
constexpr std::size_t kSegmentBytes = kVideoFrames * kVideoSize * kVideoSize;

}  // namespace

std::vector<VideoSegment> parse_segments(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 9 || !std::equal(kMagic, kMagic + 5, bytes.begin())) {
    throw FormatError("segment file: missing AVSG1 magic");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(bytes[5]) |
                              static_cast<std::uint64_t>(bytes[6]) << 8 |
                              static_cast<std::uint64_t>(bytes[7]) << 16 |
                              static_cast<std::uint64_t>(bytes[8]) << 24;
  if (bytes.size() - 9 != count * kSegmentBytes) {
    throw FormatError("segment file: header declares " + std::to_string(count) +
                      " segments of 5x80x80 but payload has " + std::to_string(bytes.size() - 9) +
                      " bytes");
  }
  std::vector<VideoSegment> out(count);
  const std::uint8_t* p = bytes.data() + 9;
  for (auto& seg : out) {
    for (std::size_t i = 0; i < kSegmentBytes; ++i) seg.pixels[i] = p[i] / 255.0;
    p += kSegmentBytes;
  }
  return out;
}

std::vector<std::uint8_t> serialize_segments(const std::vector<VideoSegment>& segments) {
  if (segments.size() > 0xffffffffULL) throw FormatError("segment file: too many segments");
  std::vector<std::uint8_t> out(kMagic, kMagic + 5);
  const auto count = static_cast<std::uint32_t>(segments.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(count >> (8 * b)));
  out.reserve(out.size() + segments.size() * kSegmentBytes);
  for (const auto& seg : segments) {
    if (seg.pixels.size() != kSegmentBytes) {
      throw DimensionError("segment file: segment has " + std::to_string(seg.pixels.size()) +
                           " pixels, expected 32000");
    }
    for (double v : seg.pixels) {
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

std::vector<VideoSegment> load_segments(const std::filesystem::path& path) {
  return parse_segments(read_file_bytes(path));
}

void save_segments(const std::filesystem::path& path, const std::vector<VideoSegment>& segments) {
  write_file_bytes(path, serialize_segments(segments));
}

const char* noise_name(NoiseKind kind) { return kind == NoiseKind::kWhite ? "white" : "babble"; }

NoiseKind parse_noise(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "babble") return NoiseKind::kBabble;
  throw ConfigError("noise: expected 'white' or 'babble', got '" + name + "'");
}

std::vector<AVExample> make_examples(const std::string& utterance_id, const Waveform& clean,
                                     const Waveform& mixture,
                                     const std::vector<VideoSegment>& video, double snr_db) {
  if (clean.samples.size() != mixture.samples.size()) {
    throw DimensionError("examples: clean has " + std::to_string(clean.samples.size()) +
                         " samples, mixture has " + std::to_string(mixture.samples.size()));
  }
  if (video.empty()) throw FormatError("examples: utterance " + utterance_id + " has no video");
  const auto mix_chunks = chunk(log_mel(mixture));
  const auto clean_chunks = chunk(log_mel(clean));
  std::vector<AVExample> out;
  out.reserve(mix_chunks.size());
  for (std::size_t k = 0; k < mix_chunks.size(); ++k) {
    AVExample ex;
    ex.mixture_chunk = mix_chunks[k];
    ex.clean_chunk = clean_chunks[k];
    ex.video = video[std::min(k, video.size() - 1)];
    ex.utterance_id = utterance_id;
    ex.chunk_index = k;
    ex.snr_db = snr_db;
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

constexpr std::size_t kPitchSegment = kSampleRate / 5;  // 200 ms
constexpr double kCleanRms = 0.1;
constexpr double kPeakLimit = 0.9;

// Voiced source plus its envelope sampled at every video frame.
struct Voice {
  std::vector<double> samples;
  std::vector<double> frame_env;
};

Voice synth_voice(std::mt19937_64& rng, std::size_t samples, std::size_t video_frames) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Envelope knots at video frame centres, linearly interpolated.
  std::vector<double> knots(video_frames + 1);
  for (auto& k : knots) k = 0.05 + 0.95 * unit(rng);
  const std::size_t span = std::max(samples, video_frames * kSamplesPerVideoFrame);
  std::vector<double> env(span);
  const double half = kSamplesPerVideoFrame / 2.0;
  for (std::size_t n = 0; n < span; ++n) {
    const double pos = std::max(0.0, (static_cast<double>(n) - half) / kSamplesPerVideoFrame);
    const auto i = std::min(static_cast<std::size_t>(pos), video_frames - 1);
    const double t = std::min(pos - static_cast<double>(i), 1.0);
    env[n] = (1.0 - t) * knots[i] + t * knots[i + 1];
  }

  Voice v;
  v.samples.assign(samples, 0.0);
  std::vector<double> phase(4, 0.0);
  for (std::size_t start = 0; start < samples; start += kPitchSegment) {
    const double f0 = 100.0 + 150.0 * unit(rng);
    const int harmonics = 2 + static_cast<int>(std::min(2.0, std::floor(3.0 * unit(rng))));
    double amp[4] = {0, 0, 0, 0};
    double power = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      amp[h] = 0.3 + 0.7 * unit(rng);
      power += amp[h] * amp[h] / 2.0;
    }
    const double norm = 1.0 / std::sqrt(power);
    const std::size_t end = std::min(samples, start + kPitchSegment);
    for (std::size_t n = start; n < end; ++n) {
      double s = 0.0;
      for (int h = 0; h < harmonics; ++h) {
        phase[h] += 2.0 * std::numbers::pi * f0 * (h + 1) / kSampleRate;
        s += amp[h] * std::sin(phase[h]);
      }
      v.samples[n] = env[n] * s * norm;
    }
    for (std::size_t h = 0; h < phase.size(); ++h) {
      phase[h] = std::fmod(phase[h], 2.0 * std::numbers::pi);
    }
  }
  v.frame_env.resize(video_frames);
  for (std::size_t f = 0; f < video_frames; ++f) {
    double acc = 0.0;
    for (std::size_t n = 0; n < kSamplesPerVideoFrame; ++n) {
      const double e = env[f * kSamplesPerVideoFrame + n];
      acc += e * e;
    }
    v.frame_env[f] = std::sqrt(acc / kSamplesPerVideoFrame);
  }
  return v;
}

void scale_to_rms(std::vector<double>& x, double rms) {
  const double p = mean_power(x);
  if (p <= 0.0) return;
  const double g = rms / std::sqrt(p);
  for (auto& v : x) v *= g;
}

double quantize_pixel(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

SyntheticUtterance synth_utterance(std::uint64_t seed, double duration_s, double snr_db,
                                   NoiseKind noise) {
  if (!(duration_s >= 0.2)) {
    throw ConfigError("synth: duration must be at least 0.2 s, got " + std::to_string(duration_s));
  }
  const auto samples = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  const std::size_t segments =
      (samples + kVideoFrames * kSamplesPerVideoFrame - 1) / (kVideoFrames * kSamplesPerVideoFrame);
  const std::size_t video_frames = segments * kVideoFrames;

  std::mt19937_64 rng(seed);
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 pixel_rng(seed ^ 0xc2b2ae3d27d4eb4fULL);

  SyntheticUtterance u;
  u.id = "synth-" + std::to_string(seed);
  u.snr_db = snr_db;
  u.noise = noise;

  Voice voice = synth_voice(rng, samples, video_frames);
  scale_to_rms(voice.samples, kCleanRms);
  u.clean = Waveform{std::move(voice.samples), kSampleRate};

  Waveform noise_wave{std::vector<double>(samples, 0.0), kSampleRate};
  if (noise == NoiseKind::kWhite) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : noise_wave.samples) v = gauss(noise_rng);
  } else {
    for (int talker = 0; talker < 6; ++talker) {
      Voice other = synth_voice(noise_rng, samples, video_frames);
      scale_to_rms(other.samples, 1.0);
      for (std::size_t n = 0; n < samples; ++n) noise_wave.samples[n] += other.samples[n];
    }
  }
  u.mixture = mix_at_snr(u.clean, noise_wave, snr_db, noise_rng);

  double peak = 0.0;
  for (double v : u.mixture.samples) peak = std::max(peak, std::abs(v));
  if (peak > kPeakLimit) {
    const double g = kPeakLimit / peak;
    for (auto& v : u.mixture.samples) v *= g;
    for (auto& v : u.clean.samples) v *= g;
  }

  // Ellipse centred in the frame; vertical semi-axis follows the envelope.
  std::normal_distribution<double> pixel_noise(0.0, 0.02);
  u.video.resize(segments);
  u.aperture.resize(video_frames);
  const double cy = 0.5 * (kVideoSize - 1), cx = cy;
  const double semi_x = 24.0;
  for (std::size_t f = 0; f < video_frames; ++f) {
    const double semi_y = 2.0 + 28.0 * voice.frame_env[f];
    u.aperture[f] = semi_y;
    auto& seg = u.video[f / kVideoFrames];
    const std::size_t local = f % kVideoFrames;
    for (std::size_t r = 0; r < kVideoSize; ++r) {
      for (std::size_t c = 0; c < kVideoSize; ++c) {
        const double dy = (r - cy) / semi_y, dx = (c - cx) / semi_x;
        const double base = dx * dx + dy * dy <= 1.0 ? 0.85 : 0.1;
        seg.at(local, r, c) = quantize_pixel(base + pixel_noise(pixel_rng));
      }
    }
  }

  u.examples = make_examples(u.id, u.clean, u.mixture, u.video, snr_db);
  return u;
}

std::vector<AVExample> synth_av_pair(std::uint64_t seed, double duration_s, double snr_db,
                                     NoiseKind noise) {
  return synth_utterance(seed, duration_s, snr_db, noise).examples;
}

}  // namespace avse
