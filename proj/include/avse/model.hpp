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

#ifndef AVSE_MODEL_HPP_
#define AVSE_MODEL_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "avse/layers.hpp"
#include "avse/lstm_layer.hpp"
#include "avse/mhca.hpp"

namespace avse {

/// Architecture hyperparameters. Channel lists have num_layers entries.
struct ModelConfig {
  std::size_t num_layers = 4;
  std::vector<std::size_t> audio_channels{8, 16, 32, 64};
  std::vector<std::size_t> video_channels{8, 16, 32, 64};
  std::vector<std::size_t> fusion_channels{8, 16, 32, 64};
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t heads = 1;
  bool strict_paper_mode = false;
  bool disable_mhca = false;
  bool disable_balancing = false;
  bool disable_filtering = false;
  bool disable_video = false;
  // Affine feature normalization: the network sees (x - input_mean) / input_std
  // and its raw output y is mapped to y * target_std + target_mean.
  double input_mean = 0.0;
  double input_std = 1.0;
  double target_mean = 0.0;
  double target_std = 1.0;

  /// 2 layers, channels 2/4, LSTM hidden 8.
  static ModelConfig tiny();

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Named variants of the ablation study.
enum class Variant { kFull, kNoFiltering, kNoBalancing, kNoMhca };
const char* variant_name(Variant v);
ModelConfig with_variant(ModelConfig base, Variant v);

/// Encoder/decoder extents per layer (frequency, time) for audio and video.
struct LayerGeometry {
  std::size_t audio_h = 0, audio_w = 0;  // encoder output of this layer
  std::size_t video_h = 0, video_w = 0;  // pooled video map before adaptation
};

/// Audio-visual convolutional recurrent network over one 200 ms chunk.
/// Inputs: mixture log-Mel [N,1,80,20], video [N,5,80,80]. Output [N,1,80,20].
class AvcrnModel {
 public:
  AvcrnModel(const ModelConfig& config, std::uint64_t seed);

  Tensor forward(const Tensor& mixture, const Tensor& video, BatchNormMode mode);

  Tensor audio_encode_layer(const Tensor& x, std::size_t layer, BatchNormMode mode);
  /// Returns (pooled map for the next layer, map adapted to the audio grid).
  std::pair<Tensor, Tensor> video_encode_layer(const Tensor& v, std::size_t layer,
                                               BatchNormMode mode);
  Tensor fuse_layer(const Tensor& audio, const Tensor& video, std::size_t layer,
                    BatchNormMode mode);
  Tensor bottleneck(const Tensor& audio, const Tensor& fused);
  Tensor decode_layer(const Tensor& d, const Tensor& fused, std::size_t layer, BatchNormMode mode);

  const ModelConfig& config() const { return config_; }
  const std::vector<LayerGeometry>& geometry() const { return geometry_; }
  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();
  std::size_t parameter_count();

  std::vector<ConvBlock> audio_enc;
  std::vector<ConvBlock> video_enc;
  std::vector<ConvBlock> fusion;
  std::vector<LstmLayer> lstm;
  Tensor proj_weight;
  Tensor proj_bias;
  std::vector<MhcaBlock> mhca;
  std::vector<ConvBlock> decoder;

 private:
  ModelConfig config_;
  std::vector<LayerGeometry> geometry_;
};

}  // namespace avse

#endif  // AVSE_MODEL_HPP_
