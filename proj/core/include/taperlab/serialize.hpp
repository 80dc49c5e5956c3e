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

// On-disk formats.
//
// TaperBank JSON:
//   {"kind": "swce", "K": 8, "N": 400, "weights": [...], "tapers": [[...], ...]}
//
// Binary matrix container (little-endian):
//   offset 0   char[4]  magic "TPLF"
//          4   uint32   version (1)
//          8   uint64   rows (frames)
//         16   uint64   dims
//         24   uint64   config hash
//         32   float64  rows * dims values, row-major
//
// Config documents are JSON objects; unknown keys are rejected and every
// parse error names the offending field. Errors throw ConfigError.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "taperlab/corpus.hpp"
#include "taperlab/features.hpp"
#include "taperlab/leakage.hpp"
#include "taperlab/multitaper.hpp"
#include "taperlab/optimizer.hpp"

namespace taperlab {

// --- TaperBank ---
std::string taper_bank_to_json(const TaperBank& bank);
TaperBank taper_bank_from_json(std::string_view text);
void save_taper_bank(const std::filesystem::path& path, const TaperBank& bank);
TaperBank load_taper_bank(const std::filesystem::path& path);

// --- Binary container ---
inline constexpr char kContainerMagic[4] = {'T', 'P', 'L', 'F'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct MatrixContainer {
  std::uint64_t rows = 0;
  std::uint64_t dims = 0;
  std::uint64_t config_hash = 0;
  std::vector<double> data;
};

void write_container(std::ostream& out, const MatrixContainer& matrix);
// Throws InputError on a bad magic, version or truncated payload.
MatrixContainer read_container(std::istream& in);

// --- FeatureMatrix ---
void write_features_binary(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_features_binary(std::istream& in);
// One frame per row, no header, values at full precision.
void write_features_csv(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_features_csv(std::istream& in);

// --- Config documents ---
FeatureConfig feature_config_from_json(std::string_view text);
std::string feature_config_to_json(const FeatureConfig& config);
TrainConfig train_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& config);
ToyCorpusSpec corpus_spec_from_json(std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// --- Training artifacts ---
// One JSON object per line:
//   {"epoch", "loss", "lambda", "lambda_raw", "top2_mass", "entropy"}
void write_train_log(std::ostream& out, const TrainLog& log);
TrainLog read_train_log(std::istream& in);

// <prefix>.bank.json, <prefix>.projection.tplf, <prefix>.prototypes.tplf
void save_checkpoint(const std::filesystem::path& prefix, const TaperBank& bank,
                     const ToyClassifier& classifier);

// --- Leakage ---
std::string leakage_report_to_json(const LeakageReport& report);
// Header "estimator,is_distance,width_500,width_1000" (one column per center).
void write_leakage_csv(std::ostream& out, const LeakageReport& report);
// Header "bin_hz,<name>..." then n_fft/2+1 rows of peak-relative dB.
void write_spectra_csv(std::ostream& out, const LeakageReport& report);

}  // namespace taperlab
