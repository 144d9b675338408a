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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "avse/error.hpp"
#include "avse/trainer.hpp"
#include "oracles.hpp"

using namespace avse;

namespace {

std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Utterance utterance(std::uint64_t seed, double seconds) {
  return synth_av_pair(seed, seconds, -5.0);
}

// Squares its input but back-propagates 2.1 * x instead of 2 * x.
Tensor bad_square(const Tensor& x) {
  std::vector<double> y;
  for (double v : x.values()) y.push_back(v * v);
  return detail::make_op("bad_square", x.shape(), std::move(y), {x}, [](detail::Node& out) {
    auto* p = out.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * 2.1 * p->value[i];
  });
}

}  // namespace

double mask_sum(const Batch& b, std::size_t row) {
  double s = 0.0;
  for (std::size_t i = 0; i < 80 * 20; ++i) s += b.mask[row * 80 * 20 + i];
  return s;
}

TEST_CASE("make_batch pads shorter utterances and masks the padding") {
  std::vector<Utterance> same{utterance(1, 0.6), utterance(2, 0.6)};
  Batch b = make_batch(same);
  CHECK(b.chunks_per_utterance == 3);
  for (std::size_t row = 0; row < 6; ++row) {
    CHECK(mask_sum(b, row) == 80.0 * same[row / 3][row % 3].mixture_chunk.valid_frames);
  }

  std::vector<Utterance> ragged{utterance(3, 0.6), utterance(4, 1.0)};
  b = make_batch(ragged);
  CHECK(b.utterances == 2);
  CHECK(b.chunks_per_utterance == 5);
  CHECK(b.valid_chunks == std::vector<std::size_t>{3, 5});
  CHECK(b.mixture.shape() == Shape{10, 1, 80, 20});
  CHECK(b.video.shape() == Shape{10, 5, 80, 80});
  const std::size_t plane = 80 * 20;
  for (std::size_t row = 0; row < 10; ++row) {
    const std::size_t u = row / 5, k = row % 5;
    if (k >= ragged[u].size()) {
      CHECK(mask_sum(b, row) == 0.0);
      for (std::size_t i = 0; i < plane; ++i) CHECK(b.mixture[row * plane + i] == 0.0);
    } else {
      CHECK(mask_sum(b, row) == 80.0 * ragged[u][k].mixture_chunk.valid_frames);
    }
  }
  CHECK(b.mixture[7 * plane + 5] == ragged[1][2].mixture_chunk.matrix(0, 5));

  Batch c = compact(b);
  CHECK(c.mixture.shape() == Shape{8, 1, 80, 20});
  for (std::size_t row = 0; row < 8; ++row) CHECK(mask_sum(c, row) > 0.0);
  CHECK_THROWS_AS(make_batch(std::vector<Utterance>{}), ContractError);
}

TEST_CASE("masked loss over a padded batch equals a per-example loop") {
  std::vector<Utterance> data{utterance(5, 0.3), utterance(6, 0.8), utterance(7, 0.2)};
  ModelConfig c = fit_normalization(ModelConfig::tiny(), data);
  AvcrnModel m(c, 4);
  Batch b = make_batch(data);
  NoGradGuard guard;
  const double batched =
      mse_loss(m.forward(b.mixture, b.video, BatchNormMode::kEval), b.target, b.mask).item();

  double acc = 0.0, count = 0.0;
  for (const auto& u : data) {
    for (const auto& ex : u) {
      Batch one = make_batch(std::vector<Utterance>{{ex}});
      const auto pred = copy_values(m.forward(one.mixture, one.video, BatchNormMode::kEval));
      for (std::size_t r = 0; r < 80; ++r) {
        for (std::size_t t = 0; t < ex.clean_chunk.valid_frames; ++t) {
          const double d = pred[r * 20 + t] - ex.clean_chunk.matrix(r, t);
          acc += d * d;
          count += 1.0;
        }
      }
    }
  }
  CHECK(data[0].back().clean_chunk.valid_frames < 20);
  CHECK(batched == doctest::Approx(acc / count).epsilon(1e-12));
  CHECK(evaluate_loss(m, data, 2) == doctest::Approx(acc / count).epsilon(1e-12));
}

TEST_CASE("padding contributes exactly zero to loss and gradient") {
  std::mt19937_64 rng(1);
  Tensor pred = oracle::random_tensor({3, 1, 80, 20}, rng, true);
  Tensor target = oracle::random_tensor({3, 1, 80, 20}, rng);
  std::vector<double> mask(3 * 1600, 1.0);
  std::fill(mask.begin() + 1600, mask.begin() + 3200, 0.0);
  Tensor loss = mse_loss(pred, target, Tensor::from({3, 1, 80, 20}, mask));
  loss.backward();
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0.0) {
      CHECK(pred.grad()[i] == 0.0);
    } else {
      acc += (pred[i] - target[i]) * (pred[i] - target[i]);
    }
  }
  CHECK(loss.item() == doctest::Approx(acc / 3200).epsilon(1e-12));
}

TEST_CASE("mse examples") {
  std::mt19937_64 rng(2);
  Tensor x = oracle::random_tensor({2, 1, 4, 5}, rng);
  Tensor ones = Tensor::full(x.shape(), 1.0);
  CHECK(mse_loss(x, x, ones).item() == 0.0);
  CHECK(mse_loss(add(x, ones), x, ones).item() == doctest::Approx(1.0).epsilon(1e-15));
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = oracle::random_tensor({2, 1, 4, 5}, rng);
    Tensor b = oracle::random_tensor({2, 1, 4, 5}, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(mse_loss(a, b, ones).item() - acc / a.numel()) < 1e-12);
  }
  CHECK_THROWS_AS(mse_loss(x, x, Tensor::zeros(x.shape())), ContractError);
  CHECK_THROWS_AS(mse_loss(x, Tensor::zeros({2, 1, 4, 4}), ones), DimensionError);
}

TEST_CASE("first Adam step moves by lr times the gradient sign") {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  std::vector<double> p{0.5, -2.0, 3.0}, g{0.3, -4.0, 1e-3};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  auto before = p;
  adam_update(p, g, m, v, 1, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = -cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.eps);
    CHECK(p[i] - before[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(std::abs(p[i] - before[i]) - cfg.learning_rate) < 1e-4 * cfg.learning_rate);
  }
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor w = Tensor::from({3}, {1.0, -1.0, 0.25}, true);
  std::vector<ParamRef> params{{"w", w}};
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, state, AdamConfig{});
  CHECK(copy_values(w) == std::vector<double>{1.0, -1.0, 0.25});
  CHECK(state.step == 5);
}

TEST_CASE("Adam minimizes x squared") {
  Tensor x = Tensor::from({1}, {1.0}, true);
  std::vector<ParamRef> params{{"x", x}};
  AdamState state;
  for (int i = 0; i < 100; ++i) {
    x.zero_grad();
    sum(mul(x, x)).backward();
    adam_step(params, state, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  }
  // Scalar loop oracle of the same recursion.
  double xo = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * xo;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    xo -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(x[0] == doctest::Approx(xo).epsilon(1e-12));
  CHECK(std::abs(x[0]) < 0.01);
}

TEST_CASE("train records one loss per batch and is reproducible") {
  Dataset data;
  data.train = {utterance(10, 0.2), utterance(11, 0.4), utterance(12, 0.2)};
  data.validation = {utterance(13, 0.2)};
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 2;
  tc.seed = 5;
  tc.learning_rate = 1e-3;
  const ModelConfig c = fit_normalization(ModelConfig::tiny(), data.train);

  AvcrnModel a(c, 1), b(c, 1);
  TrainResult ra = train(a, {}, data, tc);
  TrainResult rb = train(b, {}, data, tc);
  CHECK(ra.history.size() == 3 * 2);
  CHECK(ra.history == rb.history);
  CHECK(ra.best_checkpoint == rb.best_checkpoint);
  CHECK(ra.history.back().step == 6);

  for (const auto& r : ra.history) CHECK(ra.best_val_loss <= r.val_loss);
  LoadedCheckpoint best = parse_checkpoint(ra.best_checkpoint);
  CHECK(best.state.epoch == ra.best_epoch + 1);
  CHECK(evaluate_loss(*best.model, data.validation, 2) == ra.best_val_loss);

  std::ostringstream csv;
  write_history_csv(csv, ra.history);
  const std::string text = csv.str();
  CHECK(text.rfind("epoch,step,train_loss,val_loss\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);

  tc.seed = 6;
  AvcrnModel d(c, 1);
  CHECK(train(d, {}, data, tc).history != ra.history);
}

TEST_CASE("resuming from a checkpoint continues the run exactly") {
  Dataset data;
  data.train = {utterance(20, 0.2), utterance(21, 0.2)};
  TrainConfig tc;
  tc.batch_size = 1;
  tc.learning_rate = 1e-3;
  const ModelConfig c = fit_normalization(ModelConfig::tiny(), data.train);

  tc.max_epochs = 3;
  AvcrnModel straight(c, 2);
  TrainResult full = train(straight, {}, data, tc);

  tc.max_epochs = 2;
  AvcrnModel first(c, 2);
  TrainResult part = train(first, {}, data, tc);
  LoadedCheckpoint resumed = parse_checkpoint(serialize_checkpoint(first, part.final_state));
  tc.max_epochs = 3;
  TrainResult rest = train(*resumed.model, resumed.state, data, tc);
  REQUIRE(rest.history.size() == 2);
  CHECK(rest.history[0].epoch == 2);
  CHECK(rest.history[0] == full.history[4]);
  CHECK(rest.history[1] == full.history[5]);
  CHECK(serialize_checkpoint(*resumed.model, rest.final_state) ==
        serialize_checkpoint(straight, full.final_state));
}

TEST_CASE("non-finite values abort training with diagnostics") {
  Dataset data;
  data.train = {utterance(30, 0.2)};
  TrainConfig tc;
  tc.max_epochs = 1;
  AvcrnModel m(ModelConfig::tiny(), 0);
  auto w = m.proj_weight.mutable_values();
  std::fill(w.begin(), w.end(), 1e307);
  std::string message;
  try {
    train(m, {}, data, tc);
  } catch (const NumericError& e) {
    message = e.what();
  }
  CHECK(message.find("epoch 0, batch 0") != std::string::npos);
  CHECK(message.find("proj.weight |w|=") != std::string::npos);
}

TEST_CASE("train config validation and JSON") {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("train.learning_rate"), ConfigError);
  tc = TrainConfig{};
  tc.snr_min_db = 5.0;
  tc.snr_max_db = -5.0;
  CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("train.snr_range_db"), ConfigError);
  CHECK_THROWS_WITH_AS(TrainConfig::from_json({{"lr", 1}}), doctest::Contains("train.lr"),
                       ConfigError);
  tc = TrainConfig{};
  tc.clip_norm = 5.0;
  tc.seed = 42;
  const auto back = TrainConfig::from_json(tc.to_json());
  CHECK(back.to_json() == tc.to_json());
}

TEST_CASE("grad_check flags a corrupted adjoint") {
  std::mt19937_64 rng(3);
  Tensor w = oracle::random_tensor({30}, rng, true);
  Tensor probe = oracle::random_tensor({30}, rng);
  std::vector<ParamRef> params{{"w", w}};
  auto good = grad_check([&] { return sum(mul(mul(w, w), probe)); }, params);
  CHECK(good.passed(1e-4));
  auto bad = grad_check([&] { return sum(mul(bad_square(w), probe)); }, params);
  CHECK_FALSE(bad.passed(1e-4));
  CHECK(bad.max_rel_error == doctest::Approx(0.1 / 2.1).epsilon(1e-3));
  CHECK(bad.entries[0].checked == 20);
}

TEST_CASE("grad_check covers every learnable tensor including alpha and beta") {
  Utterance u = utterance(40, 0.2);
  ModelConfig c = fit_normalization(ModelConfig::tiny(), {u});
  AvcrnModel m(c, 0);
  auto report = grad_check(m, make_batch(std::vector<Utterance>{u}), BatchNormMode::kTrain, 2);
  const auto params = m.parameters();
  REQUIRE(report.entries.size() == params.size());
  std::size_t alphas = 0, betas = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(report.entries[i].name == params[i].name);
    CHECK(report.entries[i].checked > 0);
    const auto& name = params[i].name;
    if (name.size() > 11 && name.ends_with(".mhca.alpha")) ++alphas;
    if (name.size() > 10 && name.ends_with(".mhca.beta")) ++betas;
  }
  CHECK(alphas == 2);
  CHECK(betas == 2);
}
