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


// Independent reference computations shared by the unit tests.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace taperlab::testing {

// Direct O(N^2) DFT of the windowed, zero-padded frame; all n_fft bins.
inline std::vector<std::complex<double>> direct_dft(std::span<const double> x,
                                                    std::span<const double> w,
                                                    std::size_t n_fft) {
  std::vector<std::complex<double>> out(n_fft);
  for (std::size_t f = 0; f < n_fft; ++f) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((t * f) % n_fft) /
                           static_cast<double>(n_fft);
      acc += w[t] * x[t] * std::polar(1.0, angle);
    }
    out[f] = acc;
  }
  return out;
}

inline std::vector<double> direct_power(std::span<const double> x, std::span<const double> w,
                                        std::size_t n_fft) {
  const auto X = direct_dft(x, w, n_fft);
  std::vector<double> p(n_fft / 2 + 1);
  for (std::size_t f = 0; f < p.size(); ++f) p[f] = std::norm(X[f]);
  return p;
}

inline std::vector<double> gaussian_vector(std::size_t n, std::uint64_t seed,
                                           double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(TAPERLAB_TEST_TMPDIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace taperlab::testing
