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

#include "taperlab/multitaper.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "taperlab/error.hpp"

namespace taperlab {

std::string to_string(TaperKind kind) {
  switch (kind) {
    case TaperKind::kSwce:
      return "swce";
    case TaperKind::kSingleHamming:
      return "single_hamming";
    case TaperKind::kCustom:
      return "custom";
  }
  return "custom";
}

TaperKind taper_kind_from_string(const std::string& name) {
  if (name == "swce") return TaperKind::kSwce;
  if (name == "single_hamming" || name == "hamming") return TaperKind::kSingleHamming;
  if (name == "custom") return TaperKind::kCustom;
  throw ConfigError("unknown taper kind '" + name + "'");
}

TaperBank::TaperBank(TaperKind kind, std::vector<std::vector<double>> tapers,
                     std::vector<double> weights)
    : kind_(kind), tapers_(std::move(tapers)), weights_(std::move(weights)) {
  if (tapers_.empty()) throw ShapeError("taper bank needs at least one taper");
  if (weights_.size() != tapers_.size()) {
    throw ShapeError("taper bank has " + std::to_string(tapers_.size()) +
                     " tapers but " + std::to_string(weights_.size()) +
                     " weights");
  }
  const std::size_t n = tapers_.front().size();
  if (n == 0) throw ShapeError("tapers must be non-empty");
  for (const auto& taper : tapers_) {
    if (taper.size() != n) throw ShapeError("tapers differ in length");
    for (double v : taper) {
      if (!std::isfinite(v)) throw NumericError("taper contains non-finite values");
    }
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    const double w = weights_[j];
    if (!std::isfinite(w) || !(w > 0.0)) {
      throw ConstraintError("taper weight " + std::to_string(j) +
                            " must be strictly positive, got " +
                            std::to_string(w));
    }
    sum += w;
  }
  if (kind_ != TaperKind::kCustom && std::abs(sum - 1.0) > 1e-9) {
    throw ConstraintError("taper weights must sum to 1, got " +
                          std::to_string(sum));
  }
}

TaperBank TaperBank::with_weights(std::vector<double> weights) const {
  return TaperBank(kind_, tapers_, std::move(weights));
}

void MultiTaperConfig::validate() const {
  if (num_tapers < 1) throw ConfigError("num_tapers must be >= 1");
  if (frame_length < 1 || frame_length > n_fft) {
    throw ConfigError("frame_length must lie in [1, n_fft]");
  }
}

std::vector<double> swce_taper(std::size_t j, std::size_t frame_length) {
  const double denom = static_cast<double>(frame_length + 1);
  const double scale = std::sqrt(2.0 / denom);
  std::vector<double> taper(frame_length);
  for (std::size_t t = 0; t < frame_length; ++t) {
    taper[t] = scale * std::sin(std::numbers::pi * static_cast<double>(j) *
                                static_cast<double>(t + 1) / denom);
  }
  return taper;
}

std::vector<double> swce_weights(std::size_t num_tapers,
                                 std::size_t frame_length) {
  const double denom = static_cast<double>(frame_length + 1);
  auto term = [&](std::size_t k) {
    return std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
  };
  double norm = 0.0;
  for (std::size_t k = 0; k <= num_tapers; ++k) norm += term(k);
  std::vector<double> weights(num_tapers);
  for (std::size_t j = 1; j <= num_tapers; ++j) weights[j - 1] = term(j) / norm;
  return weights;
}

TaperBank make_swce_bank(std::size_t num_tapers, std::size_t frame_length) {
  if (num_tapers < 1) throw ConfigError("number of tapers must be >= 1");
  if (frame_length < 2) throw ConfigError("frame length must be >= 2");
  // 2K >= N+1 puts sin(2 pi K/(N+1)) at or past its zero crossing.
  if (2 * num_tapers >= frame_length + 1) {
    throw ConfigError("degenerate taper bank: K=" + std::to_string(num_tapers) +
                      " must be < (N+1)/2 for N=" + std::to_string(frame_length));
  }
  std::vector<std::vector<double>> tapers;
  tapers.reserve(num_tapers);
  for (std::size_t j = 1; j <= num_tapers; ++j) {
    tapers.push_back(swce_taper(j, frame_length));
  }
  return TaperBank(TaperKind::kSwce, std::move(tapers),
                   swce_weights(num_tapers, frame_length));
}

TaperBank make_single_hamming_bank(std::size_t frame_length) {
  return TaperBank(TaperKind::kSingleHamming,
                   {make_window(WindowKind::kHamming, frame_length).coefficients},
                   {1.0});
}

OrthonormalityReport taper_orthonormality_check(const TaperBank& bank) {
  OrthonormalityReport report;
  const auto& tapers = bank.tapers();
  for (std::size_t a = 0; a < tapers.size(); ++a) {
    for (std::size_t b = a; b < tapers.size(); ++b) {
      double dot = 0.0;
      for (std::size_t t = 0; t < tapers[a].size(); ++t) {
        dot += tapers[a][t] * tapers[b][t];
      }
      if (a == b) {
        report.max_self = std::max(report.max_self, std::abs(dot - 1.0));
      } else {
        report.max_cross = std::max(report.max_cross, std::abs(dot));
      }
    }
  }
  return report;
}

std::vector<PowerSpectrum> sub_spectra(const Frame& frame,
                                       const TaperBank& bank,
                                       std::size_t n_fft) {
  if (bank.frame_length() != frame.size()) {
    throw ShapeError("taper length " + std::to_string(bank.frame_length()) +
                     " != frame length " + std::to_string(frame.size()));
  }
  std::vector<PowerSpectrum> spectra;
  spectra.reserve(bank.num_tapers());
  for (std::size_t j = 0; j < bank.num_tapers(); ++j) {
    spectra.push_back(real_dft_power(frame, bank.taper(j), n_fft));
  }
  return spectra;
}

void combine_sub_spectra(std::span<const double> spectra, std::size_t bins,
                         std::span<const double> weights,
                         std::span<double> out) {
  if (spectra.size() != bins * weights.size() || out.size() != bins) {
    throw ShapeError("sub-spectra block does not match K x bins");
  }
  for (std::size_t f = 0; f < bins; ++f) out[f] = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = weights[j];
    const double* row = spectra.data() + j * bins;
    for (std::size_t f = 0; f < bins; ++f) out[f] += w * row[f];
  }
}

PowerSpectrum combine_sub_spectra(std::span<const PowerSpectrum> spectra,
                                  std::span<const double> weights) {
  if (spectra.empty() || spectra.size() != weights.size()) {
    throw ShapeError("need one weight per sub-spectrum");
  }
  const std::size_t bins = spectra.front().size();
  PowerSpectrum out;
  out.bin_width = spectra.front().bin_width;
  out.values.assign(bins, 0.0);
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    if (spectra[j].size() != bins) throw ShapeError("sub-spectra differ in length");
    const double w = weights[j];
    for (std::size_t f = 0; f < bins; ++f) out.values[f] += w * spectra[j].values[f];
  }
  return out;
}

PowerSpectrum multitaper_power(const Frame& frame, const TaperBank& bank,
                               std::size_t n_fft) {
  const auto spectra = sub_spectra(frame, bank, n_fft);
  return combine_sub_spectra(spectra, bank.weights());
}

}  // namespace taperlab
