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

#include "avse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "avse/error.hpp"

namespace avse {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate: must be a finite positive number");
  }
  if (batch_size == 0) throw ConfigError("train.batch_size: must be > 0");
  if (!(snr_min_db <= snr_max_db)) {
    throw ConfigError("train.snr_range_db: empty range [" + std::to_string(snr_min_db) + ", " +
                      std::to_string(snr_max_db) + "]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2: must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps: must be > 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("train.clip_norm: must be >= 0");
}

json TrainConfig::to_json() const {
  return json{{"learning_rate", learning_rate}, {"batch_size", batch_size},
              {"max_epochs", max_epochs},       {"seed", seed},
              {"snr_range_db", {snr_min_db, snr_max_db}},
              {"adam_betas", {beta1, beta2}},   {"adam_eps", eps},
              {"clip_norm", clip_norm},         {"normalize", normalize}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train: expected a JSON object");
  static const std::set<std::string> known = {"learning_rate", "batch_size", "max_epochs",
                                              "seed",          "snr_range_db", "adam_betas",
                                              "adam_eps",      "clip_norm",  "normalize"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("train." + key + ": unknown field");
  }
  TrainConfig c;
  auto num = [&](const char* name, double& out) {
    if (!j.contains(name)) return;
    if (!j.at(name).is_number()) {
      throw ConfigError(std::string("train.") + name + ": expected a number, got " + j.at(name).dump());
    }
    out = j.at(name).get<double>();
  };
  auto count = [&](const char* name, auto& out) {
    if (!j.contains(name)) return;
    if (!j.at(name).is_number_integer() || j.at(name).get<long long>() < 0) {
      throw ConfigError(std::string("train.") + name + ": expected a non-negative integer, got " +
                        j.at(name).dump());
    }
    out = j.at(name).get<std::remove_reference_t<decltype(out)>>();
  };
  auto pair = [&](const char* name, double& a, double& b) {
    if (!j.contains(name)) return;
    const auto& v = j.at(name);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(std::string("train.") + name + ": expected [number, number], got " + v.dump());
    }
    a = v[0].get<double>();
    b = v[1].get<double>();
  };
  num("learning_rate", c.learning_rate);
  count("batch_size", c.batch_size);
  count("max_epochs", c.max_epochs);
  count("seed", c.seed);
  pair("snr_range_db", c.snr_min_db, c.snr_max_db);
  pair("adam_betas", c.beta1, c.beta2);
  num("adam_eps", c.eps);
  num("clip_norm", c.clip_norm);
  if (j.contains("normalize")) {
    if (!j.at("normalize").is_boolean()) throw ConfigError("train.normalize: expected a boolean");
    c.normalize = j.at("normalize").get<bool>();
  }
  c.validate();
  return c;
}

Batch make_batch(const std::vector<const Utterance*>& utterances) {
  if (utterances.empty()) throw ContractError("make_batch: no utterances");
  Batch b;
  b.utterances = utterances.size();
  for (const auto* u : utterances) {
    if (u->empty()) throw DimensionError("make_batch: utterance without chunks");
    b.valid_chunks.push_back(u->size());
    b.chunks_per_utterance = std::max(b.chunks_per_utterance, u->size());
  }
  const std::size_t rows = b.utterances * b.chunks_per_utterance;
  const std::size_t plane = kMelBands * kChunkFrames;
  const std::size_t vplane = kVideoFrames * kVideoSize * kVideoSize;
  std::vector<double> mix(rows * plane, 0.0), tgt(rows * plane, 0.0), mask(rows * plane, 0.0);
  std::vector<double> vid(rows * vplane, 0.0);
  for (std::size_t u = 0; u < b.utterances; ++u) {
    for (std::size_t k = 0; k < utterances[u]->size(); ++k) {
      const AVExample& ex = (*utterances[u])[k];
      const std::size_t row = u * b.chunks_per_utterance + k;
      for (std::size_t r = 0; r < kMelBands; ++r) {
        for (std::size_t t = 0; t < ex.mixture_chunk.valid_frames; ++t) {
          const std::size_t i = row * plane + r * kChunkFrames + t;
          mix[i] = ex.mixture_chunk.matrix(r, t);
          tgt[i] = ex.clean_chunk.matrix(r, t);
          mask[i] = 1.0;
        }
      }
      std::copy(ex.video.pixels.begin(), ex.video.pixels.end(), vid.begin() + row * vplane);
    }
  }
  b.mixture = Tensor::from({rows, 1, kMelBands, kChunkFrames}, std::move(mix));
  b.target = Tensor::from({rows, 1, kMelBands, kChunkFrames}, std::move(tgt));
  b.mask = Tensor::from({rows, 1, kMelBands, kChunkFrames}, std::move(mask));
  b.video = Tensor::from({rows, kVideoFrames, kVideoSize, kVideoSize}, std::move(vid));
  return b;
}

Batch make_batch(const std::vector<Utterance>& utterances) {
  std::vector<const Utterance*> ptrs;
  for (const auto& u : utterances) ptrs.push_back(&u);
  return make_batch(ptrs);
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  std::vector<Tensor> parts;
  for (auto r : rows) parts.push_back(slice(t, 0, r, r + 1));
  return concat(parts, 0);
}

}  // namespace

Batch compact(const Batch& batch) {
  std::vector<std::size_t> rows;
  for (std::size_t u = 0; u < batch.utterances; ++u) {
    for (std::size_t k = 0; k < batch.valid_chunks[u]; ++k) {
      rows.push_back(u * batch.chunks_per_utterance + k);
    }
  }
  if (rows.size() == batch.mixture.dim(0)) return batch;
  NoGradGuard guard;
  Batch out = batch;
  out.mixture = gather_rows(batch.mixture, rows);
  out.target = gather_rows(batch.target, rows);
  out.mask = gather_rows(batch.mask, rows);
  out.video = gather_rows(batch.video, rows);
  out.utterances = rows.size();
  out.chunks_per_utterance = 1;
  out.valid_chunks.assign(rows.size(), 1);
  return out;
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target, const Tensor& mask) {
  if (prediction.shape() != target.shape() || prediction.shape() != mask.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_str(prediction.shape()) + ", target " +
                         shape_str(target.shape()) + ", mask " + shape_str(mask.shape()));
  }
  double count = 0.0;
  for (double m : mask.values()) count += m;
  if (count == 0.0) throw ContractError("mse_loss: mask selects no elements");
  const Tensor diff = sub(prediction, target);
  return scale(sum(mul(mul(diff, diff), mask)), 1.0 / count);
}

ModelConfig fit_normalization(ModelConfig config, const std::vector<Utterance>& train) {
  double n = 0, sx = 0, sxx = 0, sy = 0, syy = 0;
  for (const auto& u : train) {
    for (const auto& ex : u) {
      for (std::size_t r = 0; r < kMelBands; ++r) {
        for (std::size_t t = 0; t < ex.mixture_chunk.valid_frames; ++t) {
          const double x = ex.mixture_chunk.matrix(r, t), y = ex.clean_chunk.matrix(r, t);
          n += 1;
          sx += x;
          sxx += x * x;
          sy += y;
          syy += y * y;
        }
      }
    }
  }
  if (n < 2) throw ContractError("fit_normalization: no training frames");
  const double mx = sx / n, my = sy / n;
  config.input_mean = mx;
  config.input_std = std::sqrt(std::max(sxx / n - mx * mx, 1e-12));
  config.target_mean = my;
  config.target_std = std::sqrt(std::max(syy / n - my * my, 1e-12));
  return config;
}

double evaluate_loss(AvcrnModel& model, const std::vector<Utterance>& utterances,
                     std::size_t batch_size) {
  NoGradGuard guard;
  double weighted = 0.0, count = 0.0;
  for (std::size_t start = 0; start < utterances.size(); start += batch_size) {
    std::vector<const Utterance*> group;
    for (std::size_t i = start; i < std::min(utterances.size(), start + batch_size); ++i) {
      group.push_back(&utterances[i]);
    }
    const Batch b = compact(make_batch(group));
    double c = 0.0;
    for (double m : b.mask.values()) c += m;
    const double loss =
        mse_loss(model.forward(b.mixture, b.video, BatchNormMode::kEval), b.target, b.mask).item();
    weighted += loss * c;
    count += c;
  }
  if (count == 0.0) throw ContractError("evaluate_loss: no utterances");
  return weighted / count;
}

namespace {

std::string norm_summary(const std::vector<ParamRef>& params) {
  std::ostringstream s;
  for (const auto& p : params) {
    double acc = 0.0;
    for (double v : p.tensor.values()) acc += v * v;
    s << "\n  " << p.name << " |w|=" << std::sqrt(acc);
  }
  return s.str();
}

}  // namespace

TrainResult train(AvcrnModel& model, TrainingState state, const Dataset& data,
                  const TrainConfig& config, const std::function<void(const LossRecord&)>& on_step) {
  config.validate();
  if (data.train.empty()) throw ContractError("train: empty training set");
  const auto& val = data.validation.empty() ? data.train : data.validation;
  auto params = model.parameters();

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::uint64_t step = state.adam.step;

  for (std::uint64_t epoch = state.epoch; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t first = result.history.size();
    for (std::size_t start = 0, batch_index = 0; start < order.size();
         start += config.batch_size, ++batch_index) {
      std::vector<const Utterance*> group;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        group.push_back(&data.train[order[i]]);
      }
      const Batch b = compact(make_batch(group));
      for (auto& p : params) p.tensor.zero_grad();
      double loss_value = 0.0;
      try {
        Tensor loss =
            mse_loss(model.forward(b.mixture, b.video, BatchNormMode::kTrain), b.target, b.mask);
        loss_value = loss.item();
        loss.backward();
      } catch (const NumericError& e) {
        throw NumericError("train: non-finite value at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) + ": " + e.what() +
                           "\nparameter norms:" + norm_summary(params));
      }
      if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
      adam_step(params, state.adam, config.adam());
      result.history.push_back({epoch, ++step, loss_value, 0.0});
    }
    const double val_loss = evaluate_loss(model, val, config.batch_size);
    if (!std::isfinite(val_loss)) {
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch) +
                         "\nparameter norms:" + norm_summary(params));
    }
    for (std::size_t i = first; i < result.history.size(); ++i) {
      result.history[i].val_loss = val_loss;
      if (on_step) on_step(result.history[i]);
    }
    state.epoch = epoch + 1;
    state.val_loss = val_loss;
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(model, state);
    }
  }
  result.final_state = state;
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<LossRecord>& history) {
  out << "epoch,step,train_loss,val_loss\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.epoch), static_cast<unsigned long long>(r.step),
                  r.train_loss, r.val_loss);
    out << buf;
  }
}

GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<ParamRef> params,
                           std::size_t samples, double step, std::uint64_t seed) {
  for (auto& p : params) p.tensor.zero_grad();
  const Tensor base = loss();
  const double floor = kFdResolution * std::max(1.0, std::abs(base.item())) / step;
  base.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    if (p.tensor.has_grad()) {
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      analytic.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  GradCheckReport report;
  std::mt19937_64 rng(seed);
  NoGradGuard guard;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].tensor.mutable_values();
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    GradCheckEntry entry{params[k].name, 0, 0, 0.0};
    for (std::size_t i : order) {
      if (entry.checked == samples) break;
      const double orig = values[i];
      std::vector<std::size_t> plus_branches, minus_branches;
      double plus, minus;
      {
        BranchLog log;
        values[i] = orig + step;
        plus = loss().item();
        plus_branches = log.branches();
      }
      {
        BranchLog log;
        values[i] = orig - step;
        minus = loss().item();
        minus_branches = log.branches();
      }
      values[i] = orig;
      if (plus_branches != minus_branches) {
        ++entry.kinks_skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport grad_check(AvcrnModel& model, const Batch& batch, BatchNormMode mode,
                           std::size_t samples, double step) {
  const Batch b = compact(batch);
  auto loss = [&] { return mse_loss(model.forward(b.mixture, b.video, mode), b.target, b.mask); };
  return grad_check(loss, model.parameters(), samples, step);
}

}  // namespace avse
