// Copyright 2026 The taperlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Spectral leakage of an estimator on a sum of on-bin sinusoids.
//
// Two measurements per estimator:
//   * Itakura-Saito distance between the peak-normalized estimate and an
//     impulsive ground truth (unit power at the tone bins, floor elsewhere),
//     averaged over bins;
//   * attenuation width around each tone: the distance between the first
//     bins on either side of the tone whose power is `threshold_db` below
//     the tone's peak, (n_right - n_left) * f_s / n_fft.

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "taperlab/dsp.hpp"
#include "taperlab/multitaper.hpp"

namespace taperlab {

struct SyntheticSignalSpec {
  std::vector<int> bin_indices = {16, 32};  // 500 Hz and 1 kHz at 16k/512
  double sample_rate = 16000.0;
  std::size_t n_fft = 512;
  std::size_t duration = 512;  // samples

  void validate() const;
};

// Bin nearest to `hz` on the n_fft grid.
int bin_for_frequency(double hz, double sample_rate, std::size_t n_fft);

// sum_n sin(2 pi n t / n_fft), t = 0..duration-1.
std::vector<double> synth_signal(const SyntheticSignalSpec& spec);

PowerSpectrum ground_truth_spectrum(const SyntheticSignalSpec& spec,
                                    double floor = 1e-10);

// (1/B) sum_f [P/Q - log(P/Q) - 1] after flooring both spectra at `floor`.
// Throws ShapeError on length mismatch, NumericError if a floored bin is
// still non-positive or non-finite.
double itakura_saito(const PowerSpectrum& estimate, const PowerSpectrum& truth,
                     double floor = 1e-10);

struct WidthMeasurement {
  double center_hz = 0.0;
  std::size_t center_bin = 0;
  std::size_t peak_bin = 0;       // where the reference level was taken
  double reference = 0.0;         // power treated as unity gain
  std::size_t left_bin = 0;       // n_left
  std::size_t right_bin = 0;      // n_right
  bool clamped_left = false;      // no crossing before the boundary
  bool clamped_right = false;
  double width_hz = 0.0;               // raw-bin width
  double interpolated_width_hz = 0.0;  // crossings interpolated in dB
};

struct WidthOptions {
  double threshold_db = 80.0;
  // Search limits (inclusive). Defaults to the whole spectrum.
  std::size_t lower_bound = 0;
  std::size_t upper_bound = static_cast<std::size_t>(-1);
};

// The reference level ("unity gain") is the spectral peak inside the search
// limits, and the scan runs outward from that peak, at least one bin per
// side. `center_hz` only selects the limits check. Throws ConfigError
// when the center lies outside the spectrum or the limits, or when the
// reference level is not positive.
WidthMeasurement attenuation_width(const PowerSpectrum& estimate,
                                   double center_hz,
                                   const WidthOptions& options = {});

struct NamedEstimator {
  std::string name;
  TaperBank bank;
};

struct LeakageEntry {
  std::string name;
  double is_distance = 0.0;
  std::map<double, WidthMeasurement> widths;  // keyed by center frequency
  PowerSpectrum spectrum;                     // raw estimate
};

struct LeakageOptions {
  std::vector<double> centers_hz = {500.0, 1000.0};
  double threshold_db = 80.0;
  double floor = 1e-10;
};

struct LeakageReport {
  SyntheticSignalSpec spec;
  LeakageOptions options;
  std::vector<LeakageEntry> entries;
};

// Boundaries for a tone at `bin`: midpoints to neighbouring tones, else the
// spectrum edges.
std::pair<std::size_t, std::size_t> tone_bounds(const SyntheticSignalSpec& spec,
                                                std::size_t bin);

// Each estimator sees the first frame_length() samples of the synthetic
// signal.
LeakageReport leakage_study(std::span<const NamedEstimator> estimators,
                            const SyntheticSignalSpec& spec,
                            const LeakageOptions& options = {});

}  // namespace taperlab
