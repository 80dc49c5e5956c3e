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

// Framing, window generation and the single-window power spectrum
//
//   S(f) = | sum_t w(t) x(t) exp(-i 2 pi t f / n_fft) |^2,  f = 0..n_fft/2
//
// Frames shorter than n_fft are zero-padded after windowing.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace taperlab {

enum class WindowKind { kHamming, kRectangular, kCustom };

struct Window {
  WindowKind kind = WindowKind::kCustom;
  std::vector<double> coefficients;

  std::size_t size() const { return coefficients.size(); }
};

// Hamming is w(t) = 0.54 - 0.46 cos(2 pi t / N), 0 <= t < N (the periodic
// form). Throws ConfigError for N < 2 or kind == kCustom.
Window make_window(WindowKind kind, std::size_t length);

struct Frame {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  std::size_t size() const { return samples.size(); }
};

// Framing and signal conditioning shared by every front-end.
struct FramingConfig {
  double sample_rate = 16000.0;
  std::size_t frame_length = 400;  // 25 ms
  std::size_t frame_shift = 160;   // 10 ms
  std::size_t n_fft = 512;
  // Off by default; present for ablations.
  double preemphasis = 0.0;  // x[t] -= coef * x[t-1] within the frame
  double dither = 0.0;       // stddev of added Gaussian noise
  std::uint64_t dither_seed = 0;

  void validate() const;
};

// Number of full frames; trailing partial frame dropped.
std::size_t num_frames(std::size_t num_samples, const FramingConfig& config);

// Throws InputError when the signal is shorter than one frame.
std::vector<Frame> frame_signal(std::span<const double> signal,
                                const FramingConfig& config);

struct PowerSpectrum {
  std::vector<double> values;  // n_fft/2 + 1 bins
  double bin_width = 0.0;      // Hz

  std::size_t size() const { return values.size(); }
};

// Real-input FFT of fixed size. Not safe for concurrent use of one instance;
// see RealFft::for_size for a per-thread cache.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }

  // Zero-pads `input` (length <= n) and writes n/2 + 1 bins to `output`.
  void forward(std::span<const double> input,
               std::span<std::complex<double>> output);

  // Writes |X(f)|^2 for f = 0..n/2.
  void power(std::span<const double> input, std::span<double> output);

  static RealFft& for_size(std::size_t n);

 private:
  struct Plan;
  std::size_t n_;
  std::unique_ptr<Plan> plan_;
};

void check_frame(const Frame& frame, std::size_t n_fft);

PowerSpectrum real_dft_power(const Frame& frame, const Window& window,
                             std::size_t n_fft);

// Same, with a bare coefficient vector as the window.
PowerSpectrum real_dft_power(const Frame& frame,
                             std::span<const double> window,
                             std::size_t n_fft);

}  // namespace taperlab
