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

#include "taperlab/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "taperlab/error.hpp"

namespace taperlab {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n,
                const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw InputError(std::string("truncated WAV file while reading ") + what);
  }
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff),
                                 static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b = {static_cast<char>(v & 0xff),
                                 static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

}  // namespace

WavClip read_wav(std::istream& in) {
  unsigned char header[12];
  read_exact(in, header, 12, "RIFF header");
  if (std::memcmp(header, "RIFF", 4) != 0 || std::memcmp(header + 8, "WAVE", 4) != 0) {
    throw InputError("not a RIFF/WAVE file");
  }

  bool have_format = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  for (;;) {
    unsigned char chunk[8];
    in.read(reinterpret_cast<char*>(chunk), 8);
    if (in.gcount() == 0) break;
    if (in.gcount() != 8) throw InputError("truncated WAV chunk header");
    const std::uint32_t size = read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw InputError("WAV fmt chunk too small");
      std::vector<unsigned char> body(size + (size & 1));
      read_exact(in, body.data(), body.size(), "fmt chunk");
      format = read_u16(body.data());
      channels = read_u16(body.data() + 2);
      sample_rate = read_u32(body.data() + 4);
      bits = read_u16(body.data() + 14);
      if (format == 0xFFFE && size >= 26) {
        format = read_u16(body.data() + 24);  // WAVE_FORMAT_EXTENSIBLE subformat
      }
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_format) throw InputError("WAV data chunk precedes fmt chunk");
      if (format != 1) {
        throw InputError("unsupported WAV encoding " + std::to_string(format) +
                         " (only PCM is accepted)");
      }
      if (bits != 16) {
        throw InputError("unsupported WAV sample width " + std::to_string(bits) +
                         " bits (only 16-bit is accepted)");
      }
      if (channels != 1) {
        throw InputError("unsupported WAV channel count " + std::to_string(channels) +
                         " (only mono is accepted)");
      }
      if (sample_rate != kWavSampleRate) {
        throw InputError("unsupported WAV sample rate " + std::to_string(sample_rate) +
                         " Hz (only 16000 Hz is accepted)");
      }
      if (size % 2 != 0) throw InputError("WAV data chunk has a partial sample");
      std::vector<unsigned char> body(size);
      read_exact(in, body.data(), size, "data chunk");
      WavClip clip;
      clip.sample_rate = sample_rate;
      clip.channels = channels;
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(body.data() + 2 * i));
        clip.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return clip;
    } else {
      in.ignore(static_cast<std::streamsize>(size + (size & 1)));
      if (!in) throw InputError("truncated WAV chunk");
    }
  }
  throw InputError("WAV file has no data chunk");
}

WavClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return read_wav(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_wav(std::ostream& out, const WavClip& clip) {
  if (clip.channels != 1) throw ConfigError("only mono WAV output is supported");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);
  put_u32(out, clip.sample_rate);
  put_u32(out, clip.sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double x : clip.samples) {
    const double clipped = std::clamp(x, -1.0, 1.0);
    // Inverse of the reader's q / 32768 mapping, so quantized clips round-trip.
    const long q = std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
}

void write_wav(const std::filesystem::path& path, const WavClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  write_wav(out, clip);
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

}  // namespace taperlab
