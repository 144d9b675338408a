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

#include "avse/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <string>

#include "avse/error.hpp"
#include "avse/file_io.hpp"

namespace avse {

namespace {

constexpr char kMagic[5] = {'A', 'V', 'C', 'K', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void entry(const std::string& name, const Shape& shape, std::span<const double> data) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) u64(d);
    for (double v : data) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
  }
  std::uint64_t uint(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

struct Blob {
  Shape shape;
  std::vector<double> data;
};

void restore(std::map<std::string, Blob>& blobs, const std::string& name, const Shape& shape,
             std::span<double> dst) {
  auto it = blobs.find(name);
  if (it == blobs.end()) throw FormatError("checkpoint: missing entry " + name);
  if (it->second.shape != shape) {
    throw FormatError("checkpoint: entry " + name + " has shape " + shape_str(it->second.shape) +
                      ", model expects " + shape_str(shape));
  }
  std::copy(it->second.data.begin(), it->second.data.end(), dst.begin());
  blobs.erase(it);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(AvcrnModel& model, const TrainingState& state) {
  auto params = model.parameters();
  auto buffers = model.buffers();
  const bool has_adam = !state.adam.m.empty();
  if (has_adam && state.adam.m.size() != params.size()) {
    throw ContractError("checkpoint: optimizer state does not match the model parameters");
  }
  nlohmann::json header{{"config", model.config().to_json()},
                        {"epoch", state.epoch},
                        {"adam_step", state.adam.step},
                        {"val_loss", nullptr}};
  if (std::isfinite(state.val_loss)) header["val_loss"] = state.val_loss;
  const std::string text = header.dump();

  Writer w;
  w.bytes(kMagic, 5);
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  w.u64(params.size() + buffers.size() + (has_adam ? 2 * params.size() : 0));
  for (const auto& p : params) w.entry("param/" + p.name, p.tensor.shape(), p.tensor.values());
  for (const auto& b : buffers) w.entry("buffer/" + b.name, {b.data->size()}, *b.data);
  if (has_adam) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      w.entry("adam.m/" + params[k].name, params[k].tensor.shape(), state.adam.m[k]);
      w.entry("adam.v/" + params[k].name, params[k].tensor.shape(), state.adam.v[k]);
    }
  }
  return w.take();
}

LoadedCheckpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(5) != std::string(kMagic, 5)) throw FormatError("checkpoint: missing AVCK1 magic");
  const std::uint64_t text_len = r.uint(8);
  r.need(text_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(text_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (!header.contains("config")) throw FormatError("checkpoint: header has no config");

  LoadedCheckpoint out;
  out.model = std::make_unique<AvcrnModel>(ModelConfig::from_json(header.at("config")), 0);
  out.state.epoch = header.value("epoch", std::uint64_t{0});
  out.state.adam.step = header.value("adam_step", std::uint64_t{0});
  if (header.contains("val_loss") && header.at("val_loss").is_number()) {
    out.state.val_loss = header.at("val_loss").get<double>();
  }

  std::map<std::string, Blob> blobs;
  const std::uint64_t count = r.uint(8);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::string name = r.str(r.uint(4));
    Blob b;
    const std::uint64_t rank = r.uint(4);
    if (rank > 8) throw FormatError("checkpoint: entry " + name + " has rank " + std::to_string(rank));
    for (std::uint64_t i = 0; i < rank; ++i) b.shape.push_back(r.uint(8));
    const std::size_t n = shape_numel(b.shape);
    r.need(n * 8);
    b.data.resize(n);
    for (auto& v : b.data) v = r.f64();
    if (!blobs.emplace(name, std::move(b)).second) {
      throw FormatError("checkpoint: duplicate entry " + name);
    }
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after entries");

  auto params = out.model->parameters();
  for (auto& p : params) {
    restore(blobs, "param/" + p.name, p.tensor.shape(), p.tensor.mutable_values());
  }
  for (auto& b : out.model->buffers()) restore(blobs, "buffer/" + b.name, {b.data->size()}, *b.data);
  if (blobs.count("adam.m/" + params.front().name)) {
    for (auto& p : params) {
      out.state.adam.m.emplace_back(p.tensor.numel());
      out.state.adam.v.emplace_back(p.tensor.numel());
      restore(blobs, "adam.m/" + p.name, p.tensor.shape(), out.state.adam.m.back());
      restore(blobs, "adam.v/" + p.name, p.tensor.shape(), out.state.adam.v.back());
    }
  }
  if (!blobs.empty()) throw FormatError("checkpoint: unexpected entry " + blobs.begin()->first);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, AvcrnModel& model,
                     const TrainingState& state) {
  write_file_bytes(path, serialize_checkpoint(model, state));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file_bytes(path));
}

}  // namespace avse
