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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace taperlab {

// Only 16-bit PCM, mono, 16 kHz is accepted; anything else is rejected with
// InputError. No resampling or downmixing.
inline constexpr std::uint32_t kWavSampleRate = 16000;

struct WavClip {
  std::vector<double> samples;  // in [-1, 1)
  std::uint32_t sample_rate = kWavSampleRate;
  std::uint16_t channels = 1;
};

WavClip read_wav(std::istream& in);
WavClip read_wav(const std::filesystem::path& path);

// Samples are clipped to [-1, 1] and quantized to round(x * 32768) saturated
// to int16; values already on that grid round-trip exactly.
void write_wav(std::ostream& out, const WavClip& clip);
void write_wav(const std::filesystem::path& path, const WavClip& clip);

}  // namespace taperlab
