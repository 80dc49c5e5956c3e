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

// MFCCs from an arbitrary power spectrum:
//
//   c = DCT-II_ortho( log(max(M S, floor)) )[0 .. num_ceps)
//
// The forward pass keeps what the backward pass needs, so the cepstra can be
// differentiated with respect to the spectrum values.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taperlab/dsp.hpp"
#include "taperlab/multitaper.hpp"

namespace taperlab {

double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct FeatureConfig {
  FramingConfig framing;
  std::size_t num_filters = 40;
  std::size_t num_ceps = 40;
  double f_low = 20.0;
  double f_high = 7600.0;
  double log_floor = 1e-10;
  // Divide each triangle by its sum, so a flat unit spectrum gives unit
  // filterbank energies.
  bool normalize_filters = true;
  // Spectrum estimator; null means the single-window Hamming baseline.
  std::shared_ptr<const TaperBank> estimator;

  void validate() const;
  // The estimator, or a single-Hamming bank of frame_length.
  TaperBank resolved_estimator() const;
  // Stable 64-bit fingerprint of every numeric setting, estimator included.
  std::uint64_t hash() const;
};

class MelFilterbank {
 public:
  // Triangles with corners at mel-uniform frequencies between f_low and
  // f_high, evaluated on the n_fft/2+1 bin grid. Throws ConfigError when a
  // filter covers no bin.
  explicit MelFilterbank(const FeatureConfig& config);

  std::size_t num_filters() const { return num_filters_; }
  std::size_t num_bins() const { return num_bins_; }
  double f_low() const { return f_low_; }
  double f_high() const { return f_high_; }
  const std::vector<double>& centers_hz() const { return centers_hz_; }

  // Dense num_filters x num_bins row-major matrix.
  const std::vector<double>& matrix() const { return matrix_; }
  double at(std::size_t filter, std::size_t bin) const {
    return matrix_[filter * num_bins_ + bin];
  }
  // Inclusive-exclusive bin support of a filter.
  std::size_t first_bin(std::size_t filter) const { return first_[filter]; }
  std::size_t end_bin(std::size_t filter) const { return end_[filter]; }

  // energies = M * spectrum
  void apply(std::span<const double> spectrum, std::span<double> energies) const;
  // spectrum_grad = M^T * energy_grad
  void apply_transpose(std::span<const double> energy_grad,
                       std::span<double> spectrum_grad) const;

 private:
  std::size_t num_filters_;
  std::size_t num_bins_;
  double f_low_;
  double f_high_;
  std::vector<double> centers_hz_;
  std::vector<double> matrix_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> end_;
};

MelFilterbank make_mel_filterbank(const FeatureConfig& config);

// Orthonormal DCT-II of size n, truncated to the first `rows` outputs.
class Dct {
 public:
  Dct(std::size_t n, std::size_t rows);

  std::size_t size() const { return n_; }
  std::size_t rows() const { return rows_; }

  void forward(std::span<const double> x, std::span<double> y) const;
  // x = D^T y. With rows == n this is the exact inverse.
  void transpose(std::span<const double> y, std::span<double> x) const;

 private:
  std::size_t n_;
  std::size_t rows_;
  std::vector<double> matrix_;  // rows x n
};

// Intermediate values of one MFCC evaluation.
struct MfccTrace {
  std::vector<double> energies;      // M S, before flooring
  std::vector<double> log_energies;  // log(max(energies, floor))
  std::vector<double> cepstra;
};

class MfccComputer {
 public:
  explicit MfccComputer(const FeatureConfig& config);
  MfccComputer(MelFilterbank filterbank, std::size_t num_ceps, double log_floor);

  const MelFilterbank& filterbank() const { return filterbank_; }
  std::size_t num_ceps() const { return dct_.rows(); }
  double log_floor() const { return log_floor_; }

  std::vector<double> compute(std::span<const double> spectrum) const;
  void compute(std::span<const double> spectrum, MfccTrace& trace) const;

  // d(loss)/d(spectrum) given d(loss)/d(cepstra). Floored filterbank
  // energies pass zero gradient.
  std::vector<double> backward(const MfccTrace& trace,
                               std::span<const double> cepstra_grad) const;

  // Backward from the log-energy gradient directly.
  void backward_from_log(const MfccTrace& trace,
                         std::span<const double> log_grad,
                         std::span<double> spectrum_grad) const;

  const Dct& dct() const { return dct_; }

 private:
  MelFilterbank filterbank_;
  Dct dct_;
  double log_floor_;
};

std::vector<double> mfcc(const PowerSpectrum& spectrum, const MelFilterbank& fb,
                         std::size_t num_ceps, double log_floor);

struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<double> data;  // row-major frames x dims
  std::string source_id;
  std::uint64_t config_hash = 0;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * dims, dims);
  }
};

FeatureMatrix extract_utterance(std::span<const double> signal,
                                const FeatureConfig& config,
                                const std::string& source_id = "");

}  // namespace taperlab
