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

#include "taperlab/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>

#include "taperlab/error.hpp"

namespace taperlab {

Window make_window(WindowKind kind, std::size_t length) {
  if (length < 2) {
    throw ConfigError("window length must be >= 2, got " +
                      std::to_string(length));
  }
  Window window;
  window.kind = kind;
  window.coefficients.resize(length);
  switch (kind) {
    case WindowKind::kHamming: {
      const double n = static_cast<double>(length);
      for (std::size_t t = 0; t < length; ++t) {
        window.coefficients[t] =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(t) / n);
      }
      break;
    }
    case WindowKind::kRectangular:
      std::fill(window.coefficients.begin(), window.coefficients.end(), 1.0);
      break;
    case WindowKind::kCustom:
      throw ConfigError("custom windows are built from explicit coefficients");
  }
  return window;
}

void FramingConfig::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw ConfigError("sample_rate must be positive");
  }
  if (frame_length < 2) throw ConfigError("frame_length must be >= 2");
  if (frame_shift < 1) throw ConfigError("frame_shift must be >= 1");
  if (n_fft < frame_length) {
    throw ConfigError("n_fft (" + std::to_string(n_fft) +
                      ") must be >= frame_length (" +
                      std::to_string(frame_length) + ")");
  }
  if (!std::isfinite(preemphasis) || preemphasis < 0.0 || preemphasis >= 1.0) {
    throw ConfigError("preemphasis must lie in [0, 1)");
  }
  if (!std::isfinite(dither) || dither < 0.0) {
    throw ConfigError("dither must be >= 0");
  }
}

std::size_t num_frames(std::size_t num_samples, const FramingConfig& config) {
  if (num_samples < config.frame_length) return 0;
  return (num_samples - config.frame_length) / config.frame_shift + 1;
}

std::vector<Frame> frame_signal(std::span<const double> signal,
                                const FramingConfig& config) {
  config.validate();
  const std::size_t count = num_frames(signal.size(), config);
  if (count == 0) {
    throw InputError("signal of " + std::to_string(signal.size()) +
                     " samples is shorter than one frame (" +
                     std::to_string(config.frame_length) + ")");
  }
  std::vector<Frame> frames(count);
  for (std::size_t i = 0; i < count; ++i) {
    Frame& frame = frames[i];
    frame.sample_rate = config.sample_rate;
    const auto first = signal.begin() +
                       static_cast<std::ptrdiff_t>(i * config.frame_shift);
    frame.samples.assign(first,
                         first + static_cast<std::ptrdiff_t>(config.frame_length));
    if (config.dither > 0.0) {
      // Seeded per frame so that frames are independent of evaluation order.
      std::mt19937_64 rng(config.dither_seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
      std::normal_distribution<double> noise(0.0, config.dither);
      for (double& x : frame.samples) x += noise(rng);
    }
    if (config.preemphasis > 0.0) {
      for (std::size_t t = frame.samples.size() - 1; t > 0; --t) {
        frame.samples[t] -= config.preemphasis * frame.samples[t - 1];
      }
      frame.samples[0] -= config.preemphasis * frame.samples[0];
    }
  }
  return frames;
}

namespace {

// FFTW's planner is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

}  // namespace

struct RealFft::Plan {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan != nullptr) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), plan_(std::make_unique<Plan>()) {
  if (n < 2) throw ConfigError("FFT size must be >= 2");
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_->in = fftw_alloc_real(n);
  plan_->out = fftw_alloc_complex(n / 2 + 1);
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), plan_->in,
                                     plan_->out, FFTW_ESTIMATE);
  if (plan_->plan == nullptr) {
    throw ConfigError("failed to plan FFT of size " + std::to_string(n));
  }
}

RealFft::~RealFft() = default;

void RealFft::forward(std::span<const double> input,
                      std::span<std::complex<double>> output) {
  if (input.size() > n_) {
    throw ShapeError("FFT input of " + std::to_string(input.size()) +
                     " samples exceeds size " + std::to_string(n_));
  }
  if (output.size() != n_ / 2 + 1) {
    throw ShapeError("FFT output must hold n/2+1 bins");
  }
  std::copy(input.begin(), input.end(), plan_->in);
  std::fill(plan_->in + input.size(), plan_->in + n_, 0.0);
  fftw_execute(plan_->plan);
  for (std::size_t f = 0; f < output.size(); ++f) {
    output[f] = {plan_->out[f][0], plan_->out[f][1]};
  }
}

void RealFft::power(std::span<const double> input, std::span<double> output) {
  if (input.size() > n_) {
    throw ShapeError("FFT input of " + std::to_string(input.size()) +
                     " samples exceeds size " + std::to_string(n_));
  }
  if (output.size() != n_ / 2 + 1) {
    throw ShapeError("power output must hold n/2+1 bins");
  }
  std::copy(input.begin(), input.end(), plan_->in);
  std::fill(plan_->in + input.size(), plan_->in + n_, 0.0);
  fftw_execute(plan_->plan);
  for (std::size_t f = 0; f < output.size(); ++f) {
    const double re = plan_->out[f][0];
    const double im = plan_->out[f][1];
    output[f] = re * re + im * im;
  }
}

RealFft& RealFft::for_size(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

void check_frame(const Frame& frame, std::size_t n_fft) {
  if (frame.samples.empty()) throw ShapeError("frame is empty");
  if (frame.samples.size() > n_fft) {
    throw ShapeError("frame length " + std::to_string(frame.samples.size()) +
                     " exceeds n_fft " + std::to_string(n_fft));
  }
  for (double x : frame.samples) {
    if (!std::isfinite(x)) throw NumericError("frame contains non-finite samples");
  }
}

PowerSpectrum real_dft_power(const Frame& frame,
                             std::span<const double> window,
                             std::size_t n_fft) {
  check_frame(frame, n_fft);
  if (window.size() != frame.samples.size()) {
    throw ShapeError("window length " + std::to_string(window.size()) +
                     " != frame length " + std::to_string(frame.samples.size()));
  }
  std::vector<double> windowed(frame.samples.size());
  for (std::size_t t = 0; t < windowed.size(); ++t) {
    windowed[t] = window[t] * frame.samples[t];
  }
  PowerSpectrum spectrum;
  spectrum.bin_width = frame.sample_rate / static_cast<double>(n_fft);
  spectrum.values.resize(n_fft / 2 + 1);
  RealFft::for_size(n_fft).power(windowed, spectrum.values);
  return spectrum;
}

PowerSpectrum real_dft_power(const Frame& frame, const Window& window,
                             std::size_t n_fft) {
  return real_dft_power(frame, std::span<const double>(window.coefficients),
                        n_fft);
}

}  // namespace taperlab
