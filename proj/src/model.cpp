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

#include "avse/model.hpp"

#include <cmath>
#include <set>
#include <string>

#include "avse/audio.hpp"
#include "avse/error.hpp"
#include "avse/video.hpp"

namespace avse {

using nlohmann::json;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.num_layers = 2;
  c.audio_channels = {2, 4};
  c.video_channels = {2, 4};
  c.fusion_channels = {2, 4};
  c.lstm_hidden = 8;
  return c;
}

namespace {

std::string field(const std::string& name) { return "config." + name; }

void require_list(const std::string& name, const std::vector<std::size_t>& list, std::size_t n) {
  if (list.size() != n) {
    throw ConfigError(field(name) + ": expected " + std::to_string(n) +
                      " entries (num_layers), got " + std::to_string(list.size()));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i] == 0) throw ConfigError(field(name) + "[" + std::to_string(i) + "]: must be > 0");
  }
}

void require_positive(const std::string& name, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(field(name) + ": must be a finite positive number");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (num_layers == 0) throw ConfigError(field("num_layers") + ": must be at least 1");
  require_list("audio_channels", audio_channels, num_layers);
  require_list("video_channels", video_channels, num_layers);
  require_list("fusion_channels", fusion_channels, num_layers);
  if (fusion_channels != audio_channels) {
    throw ConfigError(field("fusion_channels") +
                      ": must equal audio_channels (the fused map meets the decoder map)");
  }
  if (lstm_hidden == 0) throw ConfigError(field("lstm_hidden") + ": must be > 0");
  if (lstm_layers == 0) throw ConfigError(field("lstm_layers") + ": must be > 0");
  if (heads == 0) throw ConfigError(field("heads") + ": must be > 0");
  if (!disable_mhca) {
    for (std::size_t i = 0; i < num_layers; ++i) {
      if (audio_channels[i] % heads != 0) {
        throw ConfigError(field("heads") + ": audio_channels[" + std::to_string(i) + "] = " +
                          std::to_string(audio_channels[i]) + " is not divisible by " +
                          std::to_string(heads));
      }
    }
  }
  if (!disable_mhca && disable_balancing && disable_filtering) {
    throw ConfigError(field("disable_filtering") +
                      ": disabling both stages is the disable_mhca variant; set that instead");
  }
  if (!std::isfinite(input_mean)) throw ConfigError(field("input_mean") + ": must be finite");
  if (!std::isfinite(target_mean)) throw ConfigError(field("target_mean") + ": must be finite");
  require_positive("input_std", input_std);
  require_positive("target_std", target_std);

  std::size_t h = kMelBands, vh = kVideoSize;
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::size_t out = (h + 1) / 2;
    if (2 * out != h) {
      throw ConfigError(field("num_layers") + ": " + std::to_string(num_layers) +
                        " layers leave an odd frequency extent " + std::to_string(h) +
                        " at layer " + std::to_string(i) + ", so the decoder cannot mirror it");
    }
    h = out;
    vh /= 2;
    if (vh == 0 && !disable_video) {
      throw ConfigError(field("num_layers") + ": video extent collapses to 0 at layer " +
                        std::to_string(i));
    }
  }
}

json ModelConfig::to_json() const {
  return json{{"num_layers", num_layers},
              {"audio_channels", audio_channels},
              {"video_channels", video_channels},
              {"fusion_channels", fusion_channels},
              {"lstm_hidden", lstm_hidden},
              {"lstm_layers", lstm_layers},
              {"heads", heads},
              {"strict_paper_mode", strict_paper_mode},
              {"disable_mhca", disable_mhca},
              {"disable_balancing", disable_balancing},
              {"disable_filtering", disable_filtering},
              {"disable_video", disable_video},
              {"input_mean", input_mean},
              {"input_std", input_std},
              {"target_mean", target_mean},
              {"target_std", target_std}};
}

namespace {

// Parsed text yields unsigned integers; values built in code may be signed.
bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field(name) + ": wrong type (" + j.at(name).dump() + ")");
  }
}

void read_count(const json& j, const char* name, std::size_t& out) {
  if (!j.contains(name)) return;
  const auto& v = j.at(name);
  if (!is_count(v)) {
    throw ConfigError(field(name) + ": expected a non-negative integer, got " + v.dump());
  }
  out = v.get<std::size_t>();
}

void read_list(const json& j, const char* name, std::vector<std::size_t>& out) {
  if (!j.contains(name)) return;
  const auto& v = j.at(name);
  if (!v.is_array()) throw ConfigError(field(name) + ": expected an array, got " + v.dump());
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!is_count(v[i])) {
      throw ConfigError(field(name) + "[" + std::to_string(i) +
                        "]: expected a non-negative integer, got " + v[i].dump());
    }
    out.push_back(v[i].get<std::size_t>());
  }
}

}  // namespace

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "num_layers",  "audio_channels",   "video_channels",    "fusion_channels",
      "lstm_hidden", "lstm_layers",      "heads",             "strict_paper_mode",
      "disable_mhca", "disable_balancing", "disable_filtering", "disable_video",
      "input_mean",  "input_std",        "target_mean",       "target_std"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(field(key) + ": unknown field");
  }
  ModelConfig c;
  read_count(j, "num_layers", c.num_layers);
  read_list(j, "audio_channels", c.audio_channels);
  read_list(j, "video_channels", c.video_channels);
  if (j.contains("fusion_channels")) {
    read_list(j, "fusion_channels", c.fusion_channels);
  } else {
    c.fusion_channels = c.audio_channels;
  }
  read_count(j, "lstm_hidden", c.lstm_hidden);
  read_count(j, "lstm_layers", c.lstm_layers);
  read_count(j, "heads", c.heads);
  read_field(j, "strict_paper_mode", c.strict_paper_mode);
  read_field(j, "disable_mhca", c.disable_mhca);
  read_field(j, "disable_balancing", c.disable_balancing);
  read_field(j, "disable_filtering", c.disable_filtering);
  read_field(j, "disable_video", c.disable_video);
  read_field(j, "input_mean", c.input_mean);
  read_field(j, "input_std", c.input_std);
  read_field(j, "target_mean", c.target_mean);
  read_field(j, "target_std", c.target_std);
  c.validate();
  return c;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoFiltering: return "no_filtering";
    case Variant::kNoBalancing: return "no_balancing";
    case Variant::kNoMhca: return "no_mhca";
  }
  return "?";
}

ModelConfig with_variant(ModelConfig base, Variant v) {
  base.disable_mhca = v == Variant::kNoMhca;
  base.disable_balancing = v == Variant::kNoBalancing;
  base.disable_filtering = v == Variant::kNoFiltering;
  return base;
}

AvcrnModel::AvcrnModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t layers = config_.num_layers;

  std::size_t h = kMelBands, vh = kVideoSize;
  for (std::size_t i = 0; i < layers; ++i) {
    h = (h + 1) / 2;
    vh /= 2;
    geometry_.push_back({h, kChunkFrames, vh, vh});
  }

  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t in = i == 0 ? 1 : config_.audio_channels[i - 1];
    audio_enc.emplace_back(
        ConvSpec{in, config_.audio_channels[i], {3, 3}, {2, 1}, {1, 1}, false, true}, rng);
  }
  if (!config_.disable_video) {
    for (std::size_t i = 0; i < layers; ++i) {
      const std::size_t in = i == 0 ? kVideoFrames : config_.video_channels[i - 1];
      video_enc.emplace_back(
          ConvSpec{in, config_.video_channels[i], {3, 3}, {1, 1}, {1, 1}, false, true}, rng);
    }
  }
  for (std::size_t i = 0; i < layers; ++i) {
    fusion.emplace_back(ConvSpec{config_.audio_channels[i] + config_.video_channels[i],
                                 config_.fusion_channels[i], {1, 1}, {1, 1}, {0, 0}, false, true},
                        rng);
  }

  const std::size_t deep = config_.audio_channels.back() * geometry_.back().audio_h;
  for (std::size_t i = 0; i < config_.lstm_layers; ++i) {
    lstm.emplace_back(i == 0 ? 2 * deep : config_.lstm_hidden, config_.lstm_hidden, rng);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.lstm_hidden));
  proj_weight = uniform_param({deep, config_.lstm_hidden}, bound, rng);
  proj_bias = uniform_param({deep}, bound, rng);

  if (!config_.disable_mhca) {
    const MhcaOptions opts{config_.heads, config_.strict_paper_mode, !config_.disable_balancing,
                           !config_.disable_filtering};
    for (std::size_t i = 0; i < layers; ++i) mhca.emplace_back(config_.audio_channels[i], opts, rng);
  }
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t out = i == 0 ? 1 : config_.audio_channels[i - 1];
    decoder.emplace_back(
        ConvSpec{config_.audio_channels[i], out, {4, 3}, {2, 1}, {1, 1}, true, i != 0}, rng);
  }
}

Tensor AvcrnModel::audio_encode_layer(const Tensor& x, std::size_t layer, BatchNormMode mode) {
  return audio_enc.at(layer).forward(x, mode);
}

std::pair<Tensor, Tensor> AvcrnModel::video_encode_layer(const Tensor& v, std::size_t layer,
                                                         BatchNormMode mode) {
  const auto& g = geometry_.at(layer);
  const std::size_t n = v.dim(0);
  if (config_.disable_video) {
    return {Tensor(), Tensor::zeros({n, config_.video_channels[layer], g.audio_h, g.audio_w})};
  }
  Tensor pooled = max_pool2d(video_enc.at(layer).forward(v, mode), 2);
  Tensor adapted = adaptive_avg_pool2d(pooled, g.audio_h, g.audio_w);
  return {pooled, adapted};
}

Tensor AvcrnModel::fuse_layer(const Tensor& audio, const Tensor& video, std::size_t layer,
                              BatchNormMode mode) {
  return fusion.at(layer).forward(concat({audio, video}, 1), mode);
}

namespace {

// [N,C,H,W] -> [W,N,C*H]
Tensor to_sequence(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  return reshape(permute(x, {3, 0, 1, 2}), {w, n, c * h});
}

}  // namespace

Tensor AvcrnModel::bottleneck(const Tensor& audio, const Tensor& fused) {
  if (audio.shape() != fused.shape()) {
    throw DimensionError("bottleneck: audio " + shape_str(audio.shape()) + " vs fused " +
                         shape_str(fused.shape()));
  }
  const std::size_t n = audio.dim(0), c = audio.dim(1), h = audio.dim(2), w = audio.dim(3);
  Tensor seq = concat({to_sequence(audio), to_sequence(fused)}, 2);
  for (const auto& layer : lstm) seq = layer.forward(seq);
  Tensor flat = linear(reshape(seq, {w * n, config_.lstm_hidden}), proj_weight, proj_bias);
  return permute(reshape(flat, {w, n, c, h}), {1, 2, 3, 0});
}

Tensor AvcrnModel::decode_layer(const Tensor& d, const Tensor& fused, std::size_t layer,
                                BatchNormMode mode) {
  Tensor gated = config_.disable_mhca ? d : mhca.at(layer).forward(fused, d, mode);
  return decoder.at(layer).forward(gated, mode);
}

Tensor AvcrnModel::forward(const Tensor& mixture, const Tensor& video, BatchNormMode mode) {
  if (mixture.rank() != 4 || mixture.dim(1) != 1 || mixture.dim(2) != kMelBands ||
      mixture.dim(3) != kChunkFrames) {
    throw DimensionError("model: mixture must be [N,1,80,20], got " + shape_str(mixture.shape()));
  }
  const std::size_t n = mixture.dim(0);
  if (!config_.disable_video &&
      (!video.defined() || video.shape() != Shape{n, kVideoFrames, kVideoSize, kVideoSize})) {
    throw DimensionError("model: video must be [" + std::to_string(n) + ",5,80,80], got " +
                         (video.defined() ? shape_str(video.shape()) : std::string("none")));
  }
  Tensor a = config_.input_mean == 0.0 && config_.input_std == 1.0
                 ? mixture
                 : scale(add(mixture, Tensor::full(mixture.shape(), -config_.input_mean)),
                         1.0 / config_.input_std);
  Tensor v = video;
  std::vector<Tensor> fused;
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    a = audio_encode_layer(a, i, mode);
    if (config_.disable_video) {
      const Tensor zeros = Tensor::zeros({n, config_.video_channels[i], a.dim(2), a.dim(3)});
      fused.push_back(fuse_layer(a, zeros, i, mode));
      continue;
    }
    auto [pooled, adapted] = video_encode_layer(v, i, mode);
    fused.push_back(fuse_layer(a, adapted, i, mode));
    v = pooled;
  }
  Tensor d = bottleneck(a, fused.back());
  for (std::size_t i = config_.num_layers; i-- > 0;) d = decode_layer(d, fused[i], i, mode);
  if (config_.target_mean == 0.0 && config_.target_std == 1.0) return d;
  return add(scale(d, config_.target_std), Tensor::full(d.shape(), config_.target_mean));
}

std::vector<ParamRef> AvcrnModel::parameters() {
  std::vector<ParamRef> p;
  for (std::size_t i = 0; i < audio_enc.size(); ++i) {
    audio_enc[i].collect("enc." + std::to_string(i) + ".audio", p, nullptr);
  }
  for (std::size_t i = 0; i < video_enc.size(); ++i) {
    video_enc[i].collect("enc." + std::to_string(i) + ".video", p, nullptr);
  }
  for (std::size_t i = 0; i < fusion.size(); ++i) {
    fusion[i].collect("enc." + std::to_string(i) + ".fusion", p, nullptr);
  }
  for (std::size_t i = 0; i < lstm.size(); ++i) lstm[i].collect("lstm." + std::to_string(i), p);
  p.push_back({"proj.weight", proj_weight});
  p.push_back({"proj.bias", proj_bias});
  for (std::size_t i = 0; i < mhca.size(); ++i) {
    mhca[i].collect("dec." + std::to_string(i) + ".mhca", p, nullptr);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    decoder[i].collect("dec." + std::to_string(i) + ".deconv", p, nullptr);
  }
  return p;
}

std::vector<BufferRef> AvcrnModel::buffers() {
  std::vector<ParamRef> ignored;
  std::vector<BufferRef> b;
  for (std::size_t i = 0; i < audio_enc.size(); ++i) {
    audio_enc[i].collect("enc." + std::to_string(i) + ".audio", ignored, &b);
  }
  for (std::size_t i = 0; i < video_enc.size(); ++i) {
    video_enc[i].collect("enc." + std::to_string(i) + ".video", ignored, &b);
  }
  for (std::size_t i = 0; i < fusion.size(); ++i) {
    fusion[i].collect("enc." + std::to_string(i) + ".fusion", ignored, &b);
  }
  for (std::size_t i = 0; i < mhca.size(); ++i) {
    mhca[i].collect("dec." + std::to_string(i) + ".mhca", ignored, &b);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    decoder[i].collect("dec." + std::to_string(i) + ".deconv", ignored, &b);
  }
  return b;
}

std::size_t AvcrnModel::parameter_count() { return avse::parameter_count(parameters()); }

}  // namespace avse
