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

#ifndef AVSE_WAV_HPP_
#define AVSE_WAV_HPP_

#include <filesystem>

#include "avse/audio.hpp"

namespace avse {

/// Reads a mono 16-bit PCM RIFF/WAVE file at 16 kHz. Samples are scaled to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM at 16 kHz; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace avse

#endif  // AVSE_WAV_HPP_
