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

// Synthetic labeled corpus: each "speaker" is a pair of resonance
// frequencies; each utterance jitters them, adds harmonics and white noise.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taperlab/optimizer.hpp"

namespace taperlab {

struct SpeakerTemplate {
  double f1 = 500.0;  // Hz
  double f2 = 1500.0;
  double jitter = 30.0;  // uniform +/- Hz per utterance
};

struct ToyCorpusSpec {
  std::size_t num_speakers = 4;
  std::size_t utterances_per_speaker = 10;
  double duration_s = 0.5;
  std::uint64_t seed = 0;
  double sample_rate = 16000.0;
  double snr_db = 20.0;
  // Empty: drawn from the seed.
  std::vector<SpeakerTemplate> templates;

  void validate() const;
  std::size_t num_samples() const;
};

struct CorpusUtterance {
  std::string id;      // e.g. "spk01_utt003"
  std::string speaker; // e.g. "spk01"
  std::vector<double> samples;
};

std::vector<SpeakerTemplate> resolve_templates(const ToyCorpusSpec& spec);

std::vector<CorpusUtterance> synthesize_corpus(const ToyCorpusSpec& spec);

// Writes <id>.wav files plus manifest.csv ("path,label", paths relative to
// `dir`). Returns the manifest path.
std::filesystem::path write_corpus(const std::vector<CorpusUtterance>& corpus,
                                   const std::filesystem::path& dir);

struct ManifestEntry {
  std::filesystem::path path;
  std::string label;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

// Loads WAVs named by a manifest; labels are mapped to indices in sorted
// label order. Ids are manifest paths.
std::vector<LabeledUtterance> load_labeled_corpus(const std::filesystem::path& manifest,
                                                  std::vector<std::string>* labels = nullptr);

// In-memory variant of the same mapping.
std::vector<LabeledUtterance> to_labeled(const std::vector<CorpusUtterance>& corpus);

}  // namespace taperlab
