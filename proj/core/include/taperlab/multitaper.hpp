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

// Weighted multi-taper power spectrum estimation.
//
// A TaperBank holds K static tapers w_j of frame length N and a weight vector
// lambda. The estimate is the lambda-weighted sum of the K single-taper
// power spectra ("sub-spectra"):
//
//   S(f) = sum_j lambda(j) P_j(f),  P_j = real_dft_power(frame, w_j, n_fft)
//
// The estimate is linear in lambda, which is what makes the weights cheap to
// learn: the sub-spectra of a frame never change during training.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "taperlab/dsp.hpp"

namespace taperlab {

enum class TaperKind { kSwce, kSingleHamming, kCustom };

std::string to_string(TaperKind kind);
TaperKind taper_kind_from_string(const std::string& name);

class TaperBank {
 public:
  // Validates shape (K >= 1, equal taper lengths >= 1, finite values) and the
  // weight constraint: every weight strictly positive and, for kSwce and
  // kSingleHamming banks, summing to one within 1e-9. Throws ShapeError /
  // ConstraintError.
  TaperBank(TaperKind kind, std::vector<std::vector<double>> tapers,
            std::vector<double> weights);

  TaperKind kind() const { return kind_; }
  std::size_t num_tapers() const { return tapers_.size(); }
  std::size_t frame_length() const { return tapers_.front().size(); }
  const std::vector<std::vector<double>>& tapers() const { return tapers_; }
  std::span<const double> taper(std::size_t j) const { return tapers_.at(j); }
  const std::vector<double>& weights() const { return weights_; }

  // Same tapers, new weights (re-validated).
  TaperBank with_weights(std::vector<double> weights) const;

  bool operator==(const TaperBank&) const = default;

 private:
  TaperKind kind_;
  std::vector<std::vector<double>> tapers_;
  std::vector<double> weights_;
};

struct MultiTaperConfig {
  std::size_t num_tapers = 8;
  std::size_t frame_length = 400;
  std::size_t n_fft = 512;

  void validate() const;
};

// Sine tapers w_j(t) = sqrt(2/(N+1)) sin(pi j (t+1) / (N+1)), t = 0..N-1,
// j = 1..K, an exactly orthonormal family.
std::vector<double> swce_taper(std::size_t j, std::size_t frame_length);

// lambda(j) = sin(2 pi j/(N+1)) / sum_{k=0..K} sin(2 pi k/(N+1)).
std::vector<double> swce_weights(std::size_t num_tapers,
                                 std::size_t frame_length);

// Throws ConfigError for K < 1, N < 2 or K >= (N+1)/2.
TaperBank make_swce_bank(std::size_t num_tapers, std::size_t frame_length);

// K = 1, lambda = [1], Hamming taper: the single-window estimator packaged
// behind the multi-taper interface.
TaperBank make_single_hamming_bank(std::size_t frame_length);

struct OrthonormalityReport {
  double max_cross = 0.0;  // max_{j != j'} |<w_j, w_j'>|
  double max_self = 0.0;   // max_j |<w_j, w_j> - 1|

  double max_deviation() const { return max_cross > max_self ? max_cross : max_self; }
};

OrthonormalityReport taper_orthonormality_check(const TaperBank& bank);

// One PowerSpectrum per taper, uncombined.
std::vector<PowerSpectrum> sub_spectra(const Frame& frame,
                                       const TaperBank& bank,
                                       std::size_t n_fft);

// sum_j weights[j] * spectra[j]. Weights may be negative here; this is the
// single combination routine shared by inference and training so that both
// round identically.
PowerSpectrum combine_sub_spectra(std::span<const PowerSpectrum> spectra,
                                  std::span<const double> weights);

// Flat variant over a K x bins row-major block; writes `out` (bins).
void combine_sub_spectra(std::span<const double> spectra, std::size_t bins,
                         std::span<const double> weights, std::span<double> out);

PowerSpectrum multitaper_power(const Frame& frame, const TaperBank& bank,
                               std::size_t n_fft);

}  // namespace taperlab
