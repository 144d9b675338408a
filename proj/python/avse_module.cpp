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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <random>

#include "avse/audio.hpp"
#include "avse/checkpoint.hpp"
#include "avse/error.hpp"
#include "avse/metrics.hpp"
#include "avse/model.hpp"
#include "avse/pipeline.hpp"
#include "avse/trainer.hpp"
#include "avse/video.hpp"
#include "avse/wav.hpp"

namespace py = pybind11;
using namespace avse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Waveform to_waveform(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("waveform must be one-dimensional");
  return Waveform{std::vector<double>(a.data(), a.data() + a.size())};
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("matrix must be two-dimensional");
  Matrix m(a.shape(0), a.shape(1));
  std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(double));
  return m;
}

Array from_matrix(const Matrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
  std::memcpy(out.mutable_data(), m.data.data(), m.data.size() * sizeof(double));
  return out;
}

// [segments, 5, 80, 80]
std::vector<VideoSegment> to_segments(const Array& a) {
  if (a.ndim() != 4 || a.shape(1) != kVideoFrames || a.shape(2) != kVideoSize ||
      a.shape(3) != kVideoSize) {
    throw DimensionError("video must have shape [segments, 5, 80, 80]");
  }
  std::vector<VideoSegment> out(a.shape(0));
  const std::size_t n = kVideoFrames * kVideoSize * kVideoSize;
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::memcpy(out[s].pixels.data(), a.data() + s * n, n * sizeof(double));
  }
  return out;
}

Array from_segments(const std::vector<VideoSegment>& v) {
  const std::size_t n = kVideoFrames * kVideoSize * kVideoSize;
  Array out({static_cast<py::ssize_t>(v.size()), py::ssize_t(kVideoFrames),
             py::ssize_t(kVideoSize), py::ssize_t(kVideoSize)});
  for (std::size_t s = 0; s < v.size(); ++s) {
    std::memcpy(out.mutable_data() + s * n, v[s].pixels.data(), n * sizeof(double));
  }
  return out;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

// Holds a model whether built directly or loaded from a checkpoint.
struct PyModel {
  std::unique_ptr<AvcrnModel> model;
  TrainingState state;
};

PyModel from_checkpoint(LoadedCheckpoint loaded) {
  return {std::move(loaded.model), loaded.state};
}

py::list history_list(const std::vector<LossRecord>& h) {
  py::list out;
  for (const auto& r : h) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["step"] = r.step;
    d["train_loss"] = r.train_loss;
    d["val_loss"] = r.val_loss;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_avse, m) {
  m.doc() = "Audio-visual speech enhancement core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<FormatError>(m, "FormatError", base);

  m.attr("SAMPLE_RATE") = kSampleRate;
  m.attr("FRAME_LENGTH") = kFrameLength;
  m.attr("HOP") = kHop;
  m.attr("MEL_BANDS") = kMelBands;
  m.attr("CHUNK_FRAMES") = kChunkFrames;

  // Audio front end.
  m.def("frame_count", &frame_count, py::arg("samples"));
  m.def(
      "log_mel", [](const Array& x) { return from_matrix(log_mel(to_waveform(x))); },
      py::arg("waveform"), "80 x T log-Mel power spectrogram.");
  m.def(
      "stft_roundtrip", [](const Array& x) { return from_vector(istft(stft(to_waveform(x))).samples); },
      py::arg("waveform"), "istft(stft(x)).");
  m.def(
      "mix_at_snr",
      [](const Array& clean, const Array& noise, double snr_db, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return from_vector(mix_at_snr(to_waveform(clean), to_waveform(noise), snr_db, rng).samples);
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"), py::arg("seed") = 0);
  m.def(
      "read_wav", [](const std::filesystem::path& p) { return from_vector(read_wav(p).samples); },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& p, const Array& x) { write_wav(p, to_waveform(x)); },
      py::arg("path"), py::arg("waveform"));

  // Synthetic data.
  m.def(
      "synth_utterance",
      [](std::uint64_t seed, double duration_s, double snr_db, const std::string& noise) {
        const SyntheticUtterance u = synth_utterance(seed, duration_s, snr_db, parse_noise(noise));
        py::dict d;
        d["clean"] = from_vector(u.clean.samples);
        d["mixture"] = from_vector(u.mixture.samples);
        d["video"] = from_segments(u.video);
        d["snr_db"] = u.snr_db;
        return d;
      },
      py::arg("seed"), py::arg("duration_s") = 1.0, py::arg("snr_db") = 0.0,
      py::arg("noise") = "white");
  m.def(
      "write_synthetic_dataset",
      [](const std::filesystem::path& dir, std::uint64_t seed, std::size_t count,
         std::vector<double> snr_db, double duration_s, const std::string& noise) {
        SynthOptions o;
        o.seed = seed;
        o.count = count;
        o.snr_db = std::move(snr_db);
        o.duration_s = duration_s;
        o.noise = parse_noise(noise);
        return write_synthetic_dataset(dir, o);
      },
      py::arg("directory"), py::arg("seed") = 0, py::arg("count") = 4,
      py::arg("snr_db") = std::vector<double>{}, py::arg("duration_s") = 1.0,
      py::arg("noise") = "white");

  // Metrics.
  m.def(
      "stoi", [](const Array& c, const Array& p) { return stoi(to_waveform(c), to_waveform(p)); },
      py::arg("clean"), py::arg("processed"));
  m.def(
      "si_sdr",
      [](const Array& r, const Array& e) { return si_sdr(to_waveform(r).samples, to_waveform(e).samples); },
      py::arg("reference"), py::arg("estimate"));
  m.def(
      "log_spectral_distance",
      [](const Array& c, const Array& e) { return log_spectral_distance(to_matrix(c), to_matrix(e)); },
      py::arg("clean_log_mel"), py::arg("enhanced_log_mel"));
  m.def(
      "score",
      [](const Array& c, const Array& e) {
        const MetricScores s = score(to_waveform(c), to_waveform(e));
        py::dict d;
        d["stoi"] = s.stoi;
        d["si_sdr_db"] = s.si_sdr_db;
        d["lsd_db"] = s.lsd_db;
        return d;
      },
      py::arg("clean"), py::arg("estimate"));

  // Model.
  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::string& config_json, std::uint64_t seed) {
             const ModelConfig c = config_json.empty()
                                       ? ModelConfig{}
                                       : RunConfig::from_json(nlohmann::json::parse(config_json)).model;
             return PyModel{std::make_unique<AvcrnModel>(c, seed), {}};
           }),
           py::arg("config_json") = "", py::arg("seed") = 0,
           "Builds a model from a run-config JSON document (empty for defaults).")
      .def_static(
          "load", [](const std::filesystem::path& p) { return from_checkpoint(load_checkpoint(p)); },
          py::arg("path"))
      .def_static(
          "from_bytes", [](const py::bytes& b) { return from_checkpoint(parse_checkpoint(from_bytes(b))); },
          py::arg("data"))
      .def("save", [](PyModel& self, const std::filesystem::path& p) { save_checkpoint(p, *self.model, self.state); },
           py::arg("path"))
      .def("to_bytes", [](PyModel& self) { return to_bytes(serialize_checkpoint(*self.model, self.state)); })
      .def_property_readonly("config_json", [](const PyModel& self) { return self.model->config().to_json().dump(); })
      .def_property_readonly("epoch", [](const PyModel& self) { return self.state.epoch; })
      .def("parameter_count", [](PyModel& self) { return self.model->parameter_count(); })
      .def(
          "enhance",
          [](PyModel& self, const Array& mixture, std::optional<Array> video, bool zero_video) {
            const Enhanced e = enhance(*self.model, to_waveform(mixture),
                                       video ? to_segments(*video) : std::vector<VideoSegment>{},
                                       zero_video);
            return py::make_tuple(from_vector(e.waveform.samples), from_matrix(e.log_mel));
          },
          py::arg("mixture"), py::arg("video") = py::none(), py::arg("zero_video") = false,
          "Returns (waveform, predicted log-Mel).");

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::string& config_json,
         std::optional<std::uint64_t> seed) {
        RunConfig rc = config_json.empty() ? RunConfig{}
                                           : RunConfig::from_json(nlohmann::json::parse(config_json));
        if (seed) rc.train.seed = *seed;
        const Dataset split = split_dataset(load_dataset(read_dataset_index(data)), rc.validation_fraction);
        ModelConfig mc = rc.train.normalize ? fit_normalization(rc.model, split.train) : rc.model;
        AvcrnModel model(mc, rc.train.seed);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model, {}, split, rc.train);
        }
        py::dict d;
        d["history"] = history_list(r.history);
        d["best_epoch"] = r.best_epoch;
        d["best_val_loss"] = r.best_val_loss;
        d["best"] = py::cast(from_checkpoint(parse_checkpoint(r.best_checkpoint)));
        d["final"] =
            py::cast(from_checkpoint(parse_checkpoint(serialize_checkpoint(model, r.final_state))));
        return d;
      },
      py::arg("data"), py::arg("config_json") = "", py::arg("seed") = py::none(),
      "Trains on a dataset directory; returns history and the best and final models.");
}
