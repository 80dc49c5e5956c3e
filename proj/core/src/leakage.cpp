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

#include "taperlab/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "taperlab/error.hpp"

namespace taperlab {

void SyntheticSignalSpec::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  if (n_fft < 4) throw ConfigError("n_fft must be >= 4");
  for (int n : bin_indices) {
    if (n <= 0 || 2 * static_cast<std::size_t>(n) >= n_fft) {
      throw ConfigError("tone bin " + std::to_string(n) +
                        " must lie strictly inside (0, n_fft/2)");
    }
  }
  if (duration < 1) throw ConfigError("duration must be >= 1 sample");
}

int bin_for_frequency(double hz, double sample_rate, std::size_t n_fft) {
  return static_cast<int>(std::lround(hz * static_cast<double>(n_fft) / sample_rate));
}

std::vector<double> synth_signal(const SyntheticSignalSpec& spec) {
  spec.validate();
  std::vector<double> signal(spec.duration, 0.0);
  const double n_fft = static_cast<double>(spec.n_fft);
  for (int n : spec.bin_indices) {
    for (std::size_t t = 0; t < spec.duration; ++t) {
      signal[t] += std::sin(2.0 * std::numbers::pi * static_cast<double>(n) *
                            static_cast<double>(t) / n_fft);
    }
  }
  return signal;
}

PowerSpectrum ground_truth_spectrum(const SyntheticSignalSpec& spec, double floor) {
  spec.validate();
  PowerSpectrum truth;
  truth.bin_width = spec.sample_rate / static_cast<double>(spec.n_fft);
  truth.values.assign(spec.n_fft / 2 + 1, floor);
  for (int n : spec.bin_indices) truth.values[static_cast<std::size_t>(n)] = 1.0;
  return truth;
}

double itakura_saito(const PowerSpectrum& estimate, const PowerSpectrum& truth,
                     double floor) {
  if (estimate.size() != truth.size() || estimate.size() == 0) {
    throw ShapeError("Itakura-Saito needs two spectra of equal, non-zero length");
  }
  double total = 0.0;
  for (std::size_t f = 0; f < estimate.size(); ++f) {
    const double p = std::max(estimate.values[f], floor);
    const double q = std::max(truth.values[f], floor);
    if (!(p > 0.0) || !(q > 0.0) || !std::isfinite(p) || !std::isfinite(q)) {
      throw NumericError("Itakura-Saito: bin " + std::to_string(f) +
                         " is non-positive or non-finite after flooring");
    }
    const double ratio = p / q;
    total += ratio - std::log(ratio) - 1.0;
  }
  return total / static_cast<double>(estimate.size());
}

namespace {

double to_db(double value, double reference) {
  return 10.0 * std::log10(std::max(value / reference,
                                    std::numeric_limits<double>::min()));
}

// Fractional crossing position between `inside` (above `level` dB) and
// `outside` (at or below), linear in dB.
double interpolate_crossing(std::size_t inside, std::size_t outside,
                            double db_inside, double db_outside, double level) {
  const double span = db_inside - db_outside;
  double fraction = span > 0.0 ? (db_inside - level) / span : 1.0;
  fraction = std::clamp(fraction, 0.0, 1.0);
  const double direction = outside > inside ? 1.0 : -1.0;
  return static_cast<double>(inside) + direction * fraction;
}

}  // namespace

WidthMeasurement attenuation_width(const PowerSpectrum& estimate,
                                   double center_hz,
                                   const WidthOptions& options) {
  if (estimate.size() < 2 || !(estimate.bin_width > 0.0)) {
    throw ConfigError("attenuation width needs a spectrum with a bin width");
  }
  if (!(options.threshold_db > 0.0)) throw ConfigError("threshold_db must be positive");
  const std::size_t last = estimate.size() - 1;
  const std::size_t lo = std::min(options.lower_bound, last);
  const std::size_t hi = std::min(options.upper_bound, last);
  const double position = center_hz / estimate.bin_width;
  if (!(position >= 0.0) || position > static_cast<double>(last)) {
    throw ConfigError("center " + std::to_string(center_hz) +
                      " Hz lies outside the spectrum");
  }
  const auto center = static_cast<std::size_t>(std::lround(position));
  if (center < lo || center > hi || lo >= hi) {
    throw ConfigError("center bin " + std::to_string(center) +
                      " lies outside the search limits");
  }

  WidthMeasurement m;
  m.center_hz = center_hz;
  m.center_bin = center;
  const auto& v = estimate.values;
  m.peak_bin = static_cast<std::size_t>(
      std::max_element(v.begin() + static_cast<std::ptrdiff_t>(lo),
                       v.begin() + static_cast<std::ptrdiff_t>(hi) + 1) -
      v.begin());
  m.reference = v[m.peak_bin];
  if (!(m.reference > 0.0) || !std::isfinite(m.reference)) {
    throw ConfigError("no positive spectral peak around " +
                      std::to_string(center_hz) + " Hz");
  }
  const double threshold = -options.threshold_db;
  auto db = [&](std::size_t f) { return to_db(v[f], m.reference); };

  // Scan outward from the reference peak, which sits off the tone bin for
  // estimators with smeared mainlobes.
  const std::size_t peak = m.peak_bin;
  std::size_t right = peak;
  while (right < hi && (right == peak || db(right) > threshold)) ++right;
  m.clamped_right = right == peak || db(right) > threshold;
  m.right_bin = right;

  std::size_t left = peak;
  while (left > lo && (left == peak || db(left) > threshold)) --left;
  m.clamped_left = left == peak || db(left) > threshold;
  m.left_bin = left;

  m.width_hz = static_cast<double>(right - left) * estimate.bin_width;

  double right_pos = static_cast<double>(right);
  if (!m.clamped_right) {
    right_pos = interpolate_crossing(right - 1, right, db(right - 1), db(right), threshold);
  }
  double left_pos = static_cast<double>(left);
  if (!m.clamped_left) {
    left_pos = interpolate_crossing(left + 1, left, db(left + 1), db(left), threshold);
  }
  m.interpolated_width_hz = (right_pos - left_pos) * estimate.bin_width;
  return m;
}

std::pair<std::size_t, std::size_t> tone_bounds(const SyntheticSignalSpec& spec,
                                                std::size_t bin) {
  std::size_t lo = 0;
  std::size_t hi = spec.n_fft / 2;
  for (int n : spec.bin_indices) {
    const auto other = static_cast<std::size_t>(n);
    if (other < bin) lo = std::max(lo, (other + bin) / 2);
    if (other > bin) hi = std::min(hi, (other + bin + 1) / 2);
  }
  return {lo, hi};
}

LeakageReport leakage_study(std::span<const NamedEstimator> estimators,
                            const SyntheticSignalSpec& spec,
                            const LeakageOptions& options) {
  if (estimators.empty()) throw ConfigError("leakage study needs at least one estimator");
  spec.validate();
  const std::vector<double> signal = synth_signal(spec);
  const PowerSpectrum truth = ground_truth_spectrum(spec, options.floor);

  LeakageReport report;
  report.spec = spec;
  report.options = options;
  for (const NamedEstimator& estimator : estimators) {
    const std::size_t n = estimator.bank.frame_length();
    if (n > signal.size()) {
      throw ConfigError("estimator '" + estimator.name + "' needs " +
                        std::to_string(n) + " samples, synthetic signal has " +
                        std::to_string(signal.size()));
    }
    if (n > spec.n_fft) {
      throw ConfigError("estimator '" + estimator.name +
                        "' frame length exceeds n_fft");
    }
    Frame frame;
    frame.sample_rate = spec.sample_rate;
    frame.samples.assign(signal.begin(), signal.begin() + static_cast<std::ptrdiff_t>(n));

    LeakageEntry entry;
    entry.name = estimator.name;
    entry.spectrum = multitaper_power(frame, estimator.bank, spec.n_fft);

    const double peak =
        *std::max_element(entry.spectrum.values.begin(), entry.spectrum.values.end());
    if (!(peak > 0.0)) throw NumericError("estimate of '" + estimator.name + "' is all zero");
    PowerSpectrum normalized = entry.spectrum;
    for (double& x : normalized.values) x /= peak;
    entry.is_distance = itakura_saito(normalized, truth, options.floor);

    for (double center_hz : options.centers_hz) {
      const int bin = bin_for_frequency(center_hz, spec.sample_rate, spec.n_fft);
      if (bin <= 0 || static_cast<std::size_t>(bin) >= spec.n_fft / 2) {
        throw ConfigError("center " + std::to_string(center_hz) +
                          " Hz lies outside the spectrum");
      }
      const auto [lo, hi] = tone_bounds(spec, static_cast<std::size_t>(bin));
      WidthOptions width_options;
      width_options.threshold_db = options.threshold_db;
      width_options.lower_bound = lo;
      width_options.upper_bound = hi;
      entry.widths[center_hz] = attenuation_width(entry.spectrum, center_hz, width_options);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace taperlab
