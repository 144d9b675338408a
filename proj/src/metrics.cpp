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

#include "avse/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "avse/error.hpp"
#include "fft.hpp"

namespace avse {

namespace {

constexpr double kStopbandDb = 60.0;
constexpr int kStoiRate = 10000;
constexpr std::size_t kStoiFrame = 256;
constexpr std::size_t kStoiFft = 512;
constexpr std::size_t kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr std::size_t kStoiSegment = 30;
constexpr double kStoiBeta = -15.0;
constexpr double kStoiDynRange = 40.0;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::vector<double> resample_filter(int up, int down) {
  if (up <= 0 || down <= 0) throw ContractError("resample: factors must be positive");
  // Normalized to the upsampled rate (cycles per sample).
  const double nyquist = 0.5 / std::max(up, down);
  const double width = 0.1 * nyquist;
  const double cutoff = nyquist - width / 2.0;
  const double beta = 0.1102 * (kStopbandDb - 8.7);
  const double dw = 2.0 * std::numbers::pi * width;
  auto taps = static_cast<std::size_t>(std::ceil((kStopbandDb - 8.0) / (2.285 * dw))) + 1;
  if (taps % 2 == 0) ++taps;
  const double center = static_cast<double>(taps - 1) / 2.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  std::vector<double> h(taps);
  for (std::size_t n = 0; n < taps; ++n) {
    const double r = (static_cast<double>(n) - center) / center;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) /
                          i0_beta;
    h[n] = up * 2.0 * cutoff * sinc(2.0 * cutoff * (static_cast<double>(n) - center)) * window;
  }
  return h;
}

std::vector<double> resample(const std::vector<double>& x, int up, int down) {
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;
  const auto h = resample_filter(up, down);
  const long center = static_cast<long>(h.size() - 1) / 2;
  const long n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down - 1) / down;
  std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
  for (long m = 0; m < n_out; ++m) {
    // y[m] = sum_k h[k] * u[m*down + center - k], u the zero-stuffed input.
    const long j = m * down + center;
    double acc = 0.0;
    for (long k = j % up; k < static_cast<long>(h.size()); k += up) {
      const long i = (j - k) / up;
      if (i < 0) break;
      if (i < n_in) acc += h[k] * x[i];
    }
    y[m] = acc;
  }
  return y;
}

namespace {

const std::vector<double>& stoi_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kStoiFrame);
    for (std::size_t n = 0; n < kStoiFrame; ++n) {
      v[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n + 1) /
                                  static_cast<double>(kStoiFrame + 1));
    }
    return v;
  }();
  return w;
}

// Drops frames more than kStoiDynRange below the loudest clean frame and
// overlap-adds the survivors of both signals.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto& w = stoi_window();
  const std::size_t hop = kStoiFrame / 2;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + kStoiFrame < x.size(); s += hop) starts.push_back(s);
  std::vector<double> energy(starts.size());
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double acc = 0.0;
    for (std::size_t n = 0; n < kStoiFrame; ++n) {
      const double v = w[n] * x[starts[f] + n];
      acc += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(acc) + DBL_EPSILON);
  }
  const double top = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (energy[f] - top + kStoiDynRange > 0.0) kept.push_back(starts[f]);
  }
  const std::size_t length = kept.empty() ? 0 : (kept.size() - 1) * hop + kStoiFrame;
  std::vector<double> xs(length, 0.0), ys(length, 0.0);
  for (std::size_t f = 0; f < kept.size(); ++f) {
    for (std::size_t n = 0; n < kStoiFrame; ++n) {
      xs[f * hop + n] += w[n] * x[kept[f] + n];
      ys[f * hop + n] += w[n] * y[kept[f] + n];
    }
  }
  x = std::move(xs);
  y = std::move(ys);
}

struct OctaveBands {
  std::vector<std::size_t> lo, hi;  // half-open bin ranges
};

const OctaveBands& octave_bands() {
  static const OctaveBands bands = [] {
    OctaveBands b;
    const std::size_t bins = kStoiFft / 2 + 1;
    auto nearest = [&](double hz) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * kStoiRate / static_cast<double>(kStoiFft);
        const double d = (f - hz) * (f - hz);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      return best;
    };
    for (std::size_t i = 0; i < kStoiBands; ++i) {
      const double k = static_cast<double>(i);
      b.lo.push_back(nearest(kStoiMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0)));
      b.hi.push_back(nearest(kStoiMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0)));
    }
    return b;
  }();
  return bands;
}

// One-third-octave band magnitudes, [band][frame].
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const auto& w = stoi_window();
  const auto& fft = detail::real_fft(kStoiFft);
  const auto& bands = octave_bands();
  const std::size_t hop = kStoiFrame / 2;
  std::vector<std::vector<double>> env(kStoiBands);
  std::vector<double> frame(kStoiFft);
  std::vector<std::complex<double>> spec(kStoiFft / 2 + 1);
  for (std::size_t s = 0; s + kStoiFrame < x.size(); s += hop) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t n = 0; n < kStoiFrame; ++n) frame[n] = w[n] * x[s + n];
    fft.forward(frame.data(), spec.data());
    for (std::size_t b = 0; b < kStoiBands; ++b) {
      double acc = 0.0;
      for (std::size_t k = bands.lo[b]; k < bands.hi[b]; ++k) acc += std::norm(spec[k]);
      env[b].push_back(std::sqrt(acc));
    }
  }
  return env;
}

}  // namespace

double stoi(const Waveform& clean, const Waveform& processed) {
  if (clean.samples.size() != processed.samples.size()) {
    throw DimensionError("stoi: signals differ in length (" + std::to_string(clean.samples.size()) +
                         " vs " + std::to_string(processed.samples.size()) + ")");
  }
  if (clean.sample_rate != kSampleRate || processed.sample_rate != kSampleRate) {
    throw FormatError("stoi: expects 16 kHz input");
  }
  if (std::all_of(clean.samples.begin(), clean.samples.end(), [](double v) { return v == 0.0; })) {
    throw NumericError("stoi: clean signal is silent, score undefined");
  }
  auto x = resample(clean.samples, kStoiRate, kSampleRate);
  auto y = resample(processed.samples, kStoiRate, kSampleRate);
  remove_silent_frames(x, y);
  const auto xe = band_envelopes(x);
  const auto ye = band_envelopes(y);
  const std::size_t frames = xe[0].size();
  if (frames < kStoiSegment) {
    throw NumericError("stoi: " + std::to_string(frames) + " active frames, at least " +
                       std::to_string(kStoiSegment) + " (384 ms) are required");
  }
  const double clip = std::pow(10.0, -kStoiBeta / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(kStoiSegment), ys(kStoiSegment);
  for (std::size_t m = kStoiSegment; m <= frames; ++m) {
    for (std::size_t b = 0; b < kStoiBands; ++b) {
      double xx = 0.0, yy = 0.0;
      for (std::size_t t = 0; t < kStoiSegment; ++t) {
        xs[t] = xe[b][m - kStoiSegment + t];
        ys[t] = ye[b][m - kStoiSegment + t];
        xx += xs[t] * xs[t];
        yy += ys[t] * ys[t];
      }
      const double gain = std::sqrt(xx) / (std::sqrt(yy) + DBL_EPSILON);
      for (std::size_t t = 0; t < kStoiSegment; ++t) {
        ys[t] = std::min(ys[t] * gain, xs[t] * (1.0 + clip));
      }
      const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / kStoiSegment;
      const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / kStoiSegment;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t t = 0; t < kStoiSegment; ++t) {
        sxy += (xs[t] - mx) * (ys[t] - my);
        sxx += (xs[t] - mx) * (xs[t] - mx);
        syy += (ys[t] - my) * (ys[t] - my);
      }
      total += sxy / ((std::sqrt(sxx) + DBL_EPSILON) * (std::sqrt(syy) + DBL_EPSILON));
      ++count;
    }
  }
  return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

double si_sdr(const std::vector<double>& reference, const std::vector<double>& estimate) {
  if (reference.size() != estimate.size()) {
    throw DimensionError("si_sdr: signals differ in length");
  }
  double rr = 0.0, re = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += reference[i] * reference[i];
    re += reference[i] * estimate[i];
  }
  if (rr == 0.0) throw NumericError("si_sdr: reference signal is silent");
  const double a = re / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = a * reference[i];
    target += t * t;
    residual += (estimate[i] - t) * (estimate[i] - t);
  }
  if (target == 0.0) return -100.0;
  if (residual == 0.0) return 100.0;
  return std::clamp(10.0 * std::log10(target / residual), -100.0, 100.0);
}

double log_spectral_distance(const Matrix& clean, const Matrix& enhanced) {
  if (clean.rows != enhanced.rows || clean.cols != enhanced.cols) {
    throw DimensionError("log_spectral_distance: matrices differ in shape");
  }
  if (clean.data.empty()) throw DimensionError("log_spectral_distance: no frames");
  double acc = 0.0;
  for (std::size_t i = 0; i < clean.data.size(); ++i) {
    const double d = clean.data[i] - enhanced.data[i];
    acc += d * d;
  }
  return 10.0 / std::numbers::ln10 * std::sqrt(acc / static_cast<double>(clean.data.size()));
}

MetricScores score(const Waveform& clean, const Waveform& estimate) {
  const std::size_t n = std::min(clean.samples.size(), estimate.samples.size());
  Waveform c{{clean.samples.begin(), clean.samples.begin() + n}, clean.sample_rate};
  Waveform e{{estimate.samples.begin(), estimate.samples.begin() + n}, estimate.sample_rate};
  return {stoi(c, e), si_sdr(c.samples, e.samples), log_spectral_distance(log_mel(c), log_mel(e))};
}

EvalReport build_report(const std::vector<EvalRun>& runs) {
  struct Acc {
    double stoi = 0, sdr = 0, lsd = 0;
    std::size_t n = 0;
  };
  std::vector<std::string> variants{kUnprocessed}, noises;
  std::vector<double> snrs;
  std::map<std::tuple<std::string, double, std::string>, Acc> acc;
  for (const auto& r : runs) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) {
      variants.push_back(r.variant);
    }
    if (std::find(noises.begin(), noises.end(), r.noise) == noises.end()) noises.push_back(r.noise);
    if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end()) snrs.push_back(r.snr_db);
    auto& a = acc[{r.variant, r.snr_db, r.noise}];
    a.stoi += r.scores.stoi;
    a.sdr += r.scores.si_sdr_db;
    a.lsd += r.scores.lsd_db;
    ++a.n;
  }
  std::sort(snrs.begin(), snrs.end());
  EvalReport report;
  for (double snr : snrs) {
    for (const auto& noise : noises) {
      auto base_it = acc.find({kUnprocessed, snr, noise});
      bool any = false;
      for (const auto& v : variants) any = any || acc.count({v, snr, noise});
      if (!any) continue;
      if (base_it == acc.end()) {
        throw ContractError("build_report: no unprocessed runs for snr " + std::to_string(snr) +
                            " dB, noise " + noise);
      }
      const Acc& base = base_it->second;
      const double bs = base.stoi / base.n, bd = base.sdr / base.n, bl = base.lsd / base.n;
      for (const auto& v : variants) {
        auto it = acc.find({v, snr, noise});
        if (it == acc.end()) continue;
        const Acc& a = it->second;
        ReportRow row{v, snr, noise, a.stoi / a.n, a.sdr / a.n, a.lsd / a.n, 0, 0, 0};
        row.delta_stoi = row.stoi - bs;
        row.delta_si_sdr_db = row.si_sdr_db - bd;
        row.delta_lsd_db = row.lsd_db - bl;
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

namespace {

constexpr const char* kCsvHeader =
    "variant,snr_db,noise,stoi,si_sdr_db,lsd_db,delta_stoi,delta_si_sdr_db,delta_lsd_db";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << kCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.variant << ',' << num(r.snr_db) << ',' << r.noise << ',' << num(r.stoi) << ','
        << num(r.si_sdr_db) << ',' << num(r.lsd_db) << ',' << num(r.delta_stoi) << ','
        << num(r.delta_si_sdr_db) << ',' << num(r.delta_lsd_db) << '\n';
  }
}

EvalReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw FormatError("report csv: missing or unexpected header");
  }
  EvalReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) {
      throw FormatError("report csv line " + std::to_string(line_no) + ": expected 9 fields");
    }
    auto d = [&](std::size_t i) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f[i].size()) {
        throw FormatError("report csv line " + std::to_string(line_no) + ": bad number '" + f[i] +
                          "'");
      }
      return v;
    };
    report.rows.push_back({f[0], d(1), f[2], d(3), d(4), d(5), d(6), d(7), d(8)});
  }
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %7s %-8s %8s %10s %8s %8s %10s %8s\n", "variant", "snr_db",
                "noise", "STOI(%)", "SI-SDR", "LSD", "dSTOI", "dSI-SDR", "dLSD");
  out << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-14s %7.1f %-8s %8.2f %10.2f %8.2f %+8.2f %+10.2f %+8.2f\n",
                  r.variant.c_str(), r.snr_db, r.noise.c_str(), 100.0 * r.stoi, r.si_sdr_db,
                  r.lsd_db, 100.0 * r.delta_stoi, r.delta_si_sdr_db, r.delta_lsd_db);
    out << buf;
  }
  return out.str();
}

}  // namespace avse
