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

#ifndef AVSE_VIDEO_HPP_
#define AVSE_VIDEO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avse/audio.hpp"

namespace avse {

inline constexpr std::size_t kVideoFrames = 5;
inline constexpr std::size_t kVideoSize = 80;
inline constexpr int kVideoFps = 25;
inline constexpr std::size_t kSamplesPerVideoFrame = kSampleRate / kVideoFps;  // 640

/// Five 80x80 grayscale mouth-region frames in [0, 1], frame-major then row-major.
struct VideoSegment {
  std::vector<double> pixels = std::vector<double>(kVideoFrames * kVideoSize * kVideoSize, 0.0);

  double& at(std::size_t frame, std::size_t row, std::size_t col) {
    return pixels[(frame * kVideoSize + row) * kVideoSize + col];
  }
  double at(std::size_t frame, std::size_t row, std::size_t col) const {
    return pixels[(frame * kVideoSize + row) * kVideoSize + col];
  }
  double duration_s() const { return static_cast<double>(kVideoFrames) / kVideoFps; }

  bool operator==(const VideoSegment&) const = default;
};

/// AVSG1 container: "AVSG1", u32 LE segment count, then 5*80*80 u8 per segment.
std::vector<VideoSegment> parse_segments(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_segments(const std::vector<VideoSegment>& segments);
std::vector<VideoSegment> load_segments(const std::filesystem::path& path);
void save_segments(const std::filesystem::path& path, const std::vector<VideoSegment>& segments);

/// One aligned 200 ms training unit.
struct AVExample {
  LogMelChunk mixture_chunk;
  LogMelChunk clean_chunk;
  VideoSegment video;
  std::string utterance_id;
  std::size_t chunk_index = 0;
  double snr_db = 0.0;
};

enum class NoiseKind { kWhite, kBabble };

const char* noise_name(NoiseKind kind);
NoiseKind parse_noise(const std::string& name);

/// Pairs log-Mel chunks of (mixture, clean) with video segments. Chunk k is
/// aligned with segment k; missing trailing segments repeat the last one.
std::vector<AVExample> make_examples(const std::string& utterance_id, const Waveform& clean,
                                     const Waveform& mixture,
                                     const std::vector<VideoSegment>& video, double snr_db);

struct SyntheticUtterance {
  std::string id;
  Waveform clean;
  Waveform mixture;
  std::vector<VideoSegment> video;
  /// Ellipse vertical semi-axis (pixels) for each 25 fps frame.
  std::vector<double> aperture;
  double snr_db = 0.0;
  NoiseKind noise = NoiseKind::kWhite;
  std::vector<AVExample> examples;
};

/// Deterministic audio-video pair. Clean audio is 2-4 harmonics of a pitch
/// redrawn every 200 ms under a random envelope; the video shows an ellipse
/// whose vertical aperture follows the per-frame envelope.
SyntheticUtterance synth_utterance(std::uint64_t seed, double duration_s, double snr_db,
                                   NoiseKind noise = NoiseKind::kWhite);

std::vector<AVExample> synth_av_pair(std::uint64_t seed, double duration_s, double snr_db,
                                     NoiseKind noise = NoiseKind::kWhite);

}  // namespace avse

#endif  // AVSE_VIDEO_HPP_
