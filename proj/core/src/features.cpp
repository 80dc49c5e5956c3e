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

#include "taperlab/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "taperlab/error.hpp"

namespace taperlab {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

void FeatureConfig::validate() const {
  framing.validate();
  if (num_filters < 1) throw ConfigError("num_filters must be >= 1");
  if (num_ceps < 1 || num_ceps > num_filters) {
    throw ConfigError("num_ceps must lie in [1, num_filters]");
  }
  if (!(f_low >= 0.0) || !(f_low < f_high) ||
      !(f_high <= framing.sample_rate / 2.0)) {
    throw ConfigError("mel band edges must satisfy 0 <= f_low < f_high <= sample_rate/2");
  }
  if (!(log_floor > 0.0) || !std::isfinite(log_floor)) {
    throw ConfigError("log_floor must be positive");
  }
  if (estimator && estimator->frame_length() != framing.frame_length) {
    throw ConfigError("estimator taper length " +
                      std::to_string(estimator->frame_length()) +
                      " != frame_length " + std::to_string(framing.frame_length));
  }
}

TaperBank FeatureConfig::resolved_estimator() const {
  if (estimator) return *estimator;
  return make_single_hamming_bank(framing.frame_length);
}

namespace {

// FNV-1a, 64 bit.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      const unsigned char b = static_cast<unsigned char>(v >> (8 * i));
      add_bytes(&b, 1);
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t FeatureConfig::hash() const {
  Fingerprint fp;
  fp.add(framing.sample_rate);
  fp.add(static_cast<std::uint64_t>(framing.frame_length));
  fp.add(static_cast<std::uint64_t>(framing.frame_shift));
  fp.add(static_cast<std::uint64_t>(framing.n_fft));
  fp.add(framing.preemphasis);
  fp.add(framing.dither);
  fp.add(framing.dither_seed);
  fp.add(static_cast<std::uint64_t>(num_filters));
  fp.add(static_cast<std::uint64_t>(num_ceps));
  fp.add(f_low);
  fp.add(f_high);
  fp.add(log_floor);
  fp.add(static_cast<std::uint64_t>(normalize_filters));
  const TaperBank bank = resolved_estimator();
  fp.add(static_cast<std::uint64_t>(bank.kind()));
  for (double w : bank.weights()) fp.add(w);
  for (const auto& taper : bank.tapers()) {
    for (double v : taper) fp.add(v);
  }
  return fp.value();
}

MelFilterbank::MelFilterbank(const FeatureConfig& config)
    : num_filters_(config.num_filters),
      num_bins_(config.framing.n_fft / 2 + 1),
      f_low_(config.f_low),
      f_high_(config.f_high) {
  config.validate();
  const double mel_low = hz_to_mel(f_low_);
  const double mel_high = hz_to_mel(f_high_);
  const double step = (mel_high - mel_low) / static_cast<double>(num_filters_ + 1);
  std::vector<double> corners(num_filters_ + 2);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    corners[i] = mel_to_hz(mel_low + step * static_cast<double>(i));
  }
  const double bin_hz =
      config.framing.sample_rate / static_cast<double>(config.framing.n_fft);

  matrix_.assign(num_filters_ * num_bins_, 0.0);
  first_.assign(num_filters_, 0);
  end_.assign(num_filters_, 0);
  centers_hz_.resize(num_filters_);
  for (std::size_t m = 0; m < num_filters_; ++m) {
    const double left = corners[m];
    const double center = corners[m + 1];
    const double right = corners[m + 2];
    centers_hz_[m] = center;
    double row_sum = 0.0;
    std::size_t first = num_bins_;
    std::size_t end = 0;
    for (std::size_t k = 0; k < num_bins_; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      if (w > 0.0) {
        matrix_[m * num_bins_ + k] = w;
        row_sum += w;
        first = std::min(first, k);
        end = k + 1;
      }
    }
    if (row_sum <= 0.0) {
      throw ConfigError("mel filter " + std::to_string(m) +
                        " covers no FFT bin; reduce num_filters or raise n_fft");
    }
    if (config.normalize_filters) {
      for (std::size_t k = first; k < end; ++k) matrix_[m * num_bins_ + k] /= row_sum;
    }
    first_[m] = first;
    end_[m] = end;
  }
}

void MelFilterbank::apply(std::span<const double> spectrum,
                          std::span<double> energies) const {
  if (spectrum.size() != num_bins_ || energies.size() != num_filters_) {
    throw ShapeError("spectrum has " + std::to_string(spectrum.size()) +
                     " bins, filterbank expects " + std::to_string(num_bins_));
  }
  for (std::size_t m = 0; m < num_filters_; ++m) {
    const double* row = matrix_.data() + m * num_bins_;
    double e = 0.0;
    for (std::size_t k = first_[m]; k < end_[m]; ++k) e += row[k] * spectrum[k];
    energies[m] = e;
  }
}

void MelFilterbank::apply_transpose(std::span<const double> energy_grad,
                                    std::span<double> spectrum_grad) const {
  if (energy_grad.size() != num_filters_ || spectrum_grad.size() != num_bins_) {
    throw ShapeError("filterbank transpose shape mismatch");
  }
  std::fill(spectrum_grad.begin(), spectrum_grad.end(), 0.0);
  for (std::size_t m = 0; m < num_filters_; ++m) {
    const double g = energy_grad[m];
    if (g == 0.0) continue;
    const double* row = matrix_.data() + m * num_bins_;
    for (std::size_t k = first_[m]; k < end_[m]; ++k) spectrum_grad[k] += row[k] * g;
  }
}

MelFilterbank make_mel_filterbank(const FeatureConfig& config) {
  return MelFilterbank(config);
}

Dct::Dct(std::size_t n, std::size_t rows) : n_(n), rows_(rows) {
  if (n < 1 || rows < 1 || rows > n) throw ConfigError("invalid DCT size");
  matrix_.resize(rows * n);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      matrix_[k * n + i] =
          (k == 0 ? scale0 : scale) *
          std::cos(std::numbers::pi * static_cast<double>(k) *
                   (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
  }
}

void Dct::forward(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != rows_) throw ShapeError("DCT shape mismatch");
  for (std::size_t k = 0; k < rows_; ++k) {
    const double* row = matrix_.data() + k * n_;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) acc += row[i] * x[i];
    y[k] = acc;
  }
}

void Dct::transpose(std::span<const double> y, std::span<double> x) const {
  if (x.size() != n_ || y.size() != rows_) throw ShapeError("DCT shape mismatch");
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t k = 0; k < rows_; ++k) {
    const double* row = matrix_.data() + k * n_;
    const double g = y[k];
    for (std::size_t i = 0; i < n_; ++i) x[i] += row[i] * g;
  }
}

MfccComputer::MfccComputer(const FeatureConfig& config)
    : MfccComputer(MelFilterbank(config), config.num_ceps, config.log_floor) {}

MfccComputer::MfccComputer(MelFilterbank filterbank, std::size_t num_ceps,
                           double log_floor)
    : filterbank_(std::move(filterbank)),
      dct_(filterbank_.num_filters(), num_ceps),
      log_floor_(log_floor) {
  if (!(log_floor_ > 0.0)) throw ConfigError("log_floor must be positive");
}

void MfccComputer::compute(std::span<const double> spectrum,
                           MfccTrace& trace) const {
  const std::size_t m = filterbank_.num_filters();
  trace.energies.resize(m);
  trace.log_energies.resize(m);
  trace.cepstra.resize(dct_.rows());
  filterbank_.apply(spectrum, trace.energies);
  for (std::size_t i = 0; i < m; ++i) {
    trace.log_energies[i] = std::log(std::max(trace.energies[i], log_floor_));
  }
  dct_.forward(trace.log_energies, trace.cepstra);
}

std::vector<double> MfccComputer::compute(std::span<const double> spectrum) const {
  MfccTrace trace;
  compute(spectrum, trace);
  return std::move(trace.cepstra);
}

void MfccComputer::backward_from_log(const MfccTrace& trace,
                                     std::span<const double> log_grad,
                                     std::span<double> spectrum_grad) const {
  const std::size_t m = filterbank_.num_filters();
  if (log_grad.size() != m || trace.energies.size() != m) {
    throw ShapeError("log-energy gradient shape mismatch");
  }
  std::vector<double> energy_grad(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double e = trace.energies[i];
    // Subgradient zero on the floor (ties count as floored).
    energy_grad[i] = e > log_floor_ ? log_grad[i] / e : 0.0;
  }
  filterbank_.apply_transpose(energy_grad, spectrum_grad);
}

std::vector<double> MfccComputer::backward(
    const MfccTrace& trace, std::span<const double> cepstra_grad) const {
  std::vector<double> log_grad(filterbank_.num_filters());
  dct_.transpose(cepstra_grad, log_grad);
  std::vector<double> spectrum_grad(filterbank_.num_bins());
  backward_from_log(trace, log_grad, spectrum_grad);
  return spectrum_grad;
}

std::vector<double> mfcc(const PowerSpectrum& spectrum, const MelFilterbank& fb,
                         std::size_t num_ceps, double log_floor) {
  if (spectrum.size() != fb.num_bins()) {
    throw ShapeError("spectrum has " + std::to_string(spectrum.size()) +
                     " bins, filterbank expects " + std::to_string(fb.num_bins()));
  }
  MfccComputer computer(fb, num_ceps, log_floor);
  return computer.compute(spectrum.values);
}

FeatureMatrix extract_utterance(std::span<const double> signal,
                                const FeatureConfig& config,
                                const std::string& source_id) {
  config.validate();
  const auto frames = frame_signal(signal, config.framing);
  const TaperBank bank = config.resolved_estimator();
  const MfccComputer computer(config);

  FeatureMatrix out;
  out.frames = frames.size();
  out.dims = config.num_ceps;
  out.source_id = source_id;
  out.config_hash = config.hash();
  out.data.resize(out.frames * out.dims);
  MfccTrace trace;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const PowerSpectrum spectrum =
        multitaper_power(frames[i], bank, config.framing.n_fft);
    computer.compute(spectrum.values, trace);
    std::copy(trace.cepstra.begin(), trace.cepstra.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * out.dims));
  }
  return out;
}

}  // namespace taperlab
