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

#ifndef AVSE_METRICS_HPP_
#define AVSE_METRICS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "avse/audio.hpp"

namespace avse {

/// Low-pass prototype of the rational resampler: Kaiser-windowed sinc at the
/// upsampled rate with a 60 dB stopband starting at the lower Nyquist
/// frequency. Odd length, gain `up` in the passband.
std::vector<double> resample_filter(int up, int down);

/// Polyphase rational resampling by up/down. Output has ceil(n * up / down)
/// samples and is aligned with the input (filter delay removed).
std::vector<double> resample(const std::vector<double>& x, int up, int down);

/// Short-time objective intelligibility of `processed` against `clean`, both
/// 16 kHz and of equal length. Computed at 10 kHz: 40 dB silent-frame removal,
/// 15 one-third-octave bands from 150 Hz, 30-frame segments, clipping at
/// -15 dB SDR. Clamped to [0, 1].
double stoi(const Waveform& clean, const Waveform& processed);

/// Scale-invariant SDR in dB, clamped to [-100, 100].
double si_sdr(const std::vector<double>& reference, const std::vector<double>& estimate);

/// RMS difference of two ln-domain log-Mel matrices over their valid frames,
/// expressed in dB (x 10 / ln 10).
double log_spectral_distance(const Matrix& clean, const Matrix& enhanced);

struct MetricScores {
  double stoi = 0.0;
  double si_sdr_db = 0.0;
  double lsd_db = 0.0;
};

/// All three metrics on the common prefix of the two signals.
MetricScores score(const Waveform& clean, const Waveform& estimate);

inline constexpr const char* kUnprocessed = "unprocessed";

/// Scores of one evaluated utterance.
struct EvalRun {
  std::string variant;
  double snr_db = 0.0;
  std::string noise;
  MetricScores scores;
};

/// Mean scores per (variant, snr, noise) and their difference to the
/// unprocessed row of the same condition.
struct ReportRow {
  std::string variant;
  double snr_db = 0.0;
  std::string noise;
  double stoi = 0.0;
  double si_sdr_db = 0.0;
  double lsd_db = 0.0;
  double delta_stoi = 0.0;
  double delta_si_sdr_db = 0.0;
  double delta_lsd_db = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  bool operator==(const EvalReport&) const = default;
};

/// Throws ContractError when a condition lacks unprocessed runs. Rows are
/// ordered by SNR, then noise, then variant (unprocessed first).
EvalReport build_report(const std::vector<EvalRun>& runs);

void write_report_csv(std::ostream& out, const EvalReport& report);
EvalReport read_report_csv(std::istream& in);
/// Aligned text table; STOI is shown in percent.
std::string format_report_table(const EvalReport& report);

}  // namespace avse

#endif  // AVSE_METRICS_HPP_
