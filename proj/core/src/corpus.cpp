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

#include "taperlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "taperlab/error.hpp"
#include "taperlab/wav.hpp"

namespace taperlab {

void ToyCorpusSpec::validate() const {
  if (num_speakers < 2) throw ConfigError("num_speakers must be >= 2");
  if (utterances_per_speaker < 1) throw ConfigError("utterances_per_speaker must be >= 1");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw ConfigError("duration_s must be positive");
  }
  if (sample_rate != static_cast<double>(kWavSampleRate)) {
    throw ConfigError("sample_rate must be 16000");
  }
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  if (!templates.empty() && templates.size() != num_speakers) {
    throw ConfigError("templates must list one entry per speaker");
  }
  for (const auto& t : templates) {
    if (!(t.f1 > 0.0) || !(t.f2 > 0.0) || t.f1 >= sample_rate / 2 ||
        t.f2 >= sample_rate / 2 || !(t.jitter >= 0.0)) {
      throw ConfigError("speaker template frequencies must lie in (0, sample_rate/2)");
    }
  }
}

std::size_t ToyCorpusSpec::num_samples() const {
  return static_cast<std::size_t>(std::lround(duration_s * sample_rate));
}

std::vector<SpeakerTemplate> resolve_templates(const ToyCorpusSpec& spec) {
  if (!spec.templates.empty()) return spec.templates;
  // Stratified draws keep speakers apart: speaker s takes the s-th slice of
  // the low band and a shuffled slice of the high band.
  std::mt19937_64 rng(spec.seed ^ 0xa0761d6478bd642fULL);
  std::uniform_real_distribution<double> unit(0.15, 0.85);
  std::vector<std::size_t> high_slots(spec.num_speakers);
  for (std::size_t i = 0; i < high_slots.size(); ++i) high_slots[i] = i;
  std::shuffle(high_slots.begin(), high_slots.end(), rng);
  const double n = static_cast<double>(spec.num_speakers);
  std::vector<SpeakerTemplate> templates(spec.num_speakers);
  for (std::size_t s = 0; s < spec.num_speakers; ++s) {
    templates[s].f1 = 300.0 + 600.0 * (static_cast<double>(s) + unit(rng)) / n;
    templates[s].f2 =
        1000.0 + 1800.0 * (static_cast<double>(high_slots[s]) + unit(rng)) / n;
    templates[s].jitter = 30.0;
  }
  return templates;
}

namespace {

std::string speaker_name(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02zu", s);
  return buf;
}

std::string utterance_name(std::size_t s, std::size_t u) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%02zu_utt%03zu", s, u);
  return buf;
}

}  // namespace

std::vector<CorpusUtterance> synthesize_corpus(const ToyCorpusSpec& spec) {
  spec.validate();
  const auto templates = resolve_templates(spec);
  const std::size_t length = spec.num_samples();
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<CorpusUtterance> corpus;
  corpus.reserve(spec.num_speakers * spec.utterances_per_speaker);
  for (std::size_t s = 0; s < spec.num_speakers; ++s) {
    for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
      // One generator per utterance: output is independent of loop order.
      std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + s * 1000003ULL + u);
      std::uniform_real_distribution<double> jitter(-1.0, 1.0);
      std::uniform_real_distribution<double> phase(0.0, two_pi);
      std::normal_distribution<double> noise(0.0, 1.0);
      const SpeakerTemplate& t = templates[s];
      const double f1 = t.f1 + t.jitter * jitter(rng);
      const double f2 = t.f2 + t.jitter * jitter(rng);
      const double p1 = phase(rng);
      const double p2 = phase(rng);
      const double p3 = phase(rng);

      CorpusUtterance utt;
      utt.id = utterance_name(s, u);
      utt.speaker = speaker_name(s);
      utt.samples.resize(length);
      double power = 0.0;
      for (std::size_t i = 0; i < length; ++i) {
        const double time = static_cast<double>(i) / spec.sample_rate;
        const double x = 0.30 * std::sin(two_pi * f1 * time + p1) +
                         0.12 * std::sin(two_pi * 2.0 * f1 * time + p3) +
                         0.20 * std::sin(two_pi * f2 * time + p2);
        utt.samples[i] = x;
        power += x * x;
      }
      power /= static_cast<double>(length);
      const double noise_std = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
      for (double& x : utt.samples) {
        x += noise_std * noise(rng);
        // Snap to the 16-bit grid so the WAV round trip is lossless.
        const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
        x = q / 32768.0;
      }
      corpus.push_back(std::move(utt));
    }
  }
  return corpus;
}

std::filesystem::path write_corpus(const std::vector<CorpusUtterance>& corpus,
                                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create '" + dir.string() + "': " + ec.message());
  const std::filesystem::path manifest = dir / "manifest.csv";
  std::ofstream out(manifest);
  if (!out) throw InputError("cannot write '" + manifest.string() + "'");
  out << "path,label\n";
  for (const auto& utt : corpus) {
    const std::string file = utt.id + ".wav";
    WavClip clip;
    clip.samples = utt.samples;
    write_wav(dir / file, clip);
    out << file << ',' << utt.speaker << '\n';
  }
  if (!out) throw InputError("failed writing '" + manifest.string() + "'");
  return manifest;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InputError("cannot open manifest '" + manifest.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label") {
    throw InputError("manifest header must be 'path,label', got '" + line + "'");
  }
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size()) {
      throw InputError("manifest line " + std::to_string(line_no) +
                       " is not 'path,label'");
    }
    ManifestEntry entry;
    entry.path = line.substr(0, comma);
    if (entry.path.is_relative()) entry.path = base / entry.path;
    entry.label = line.substr(comma + 1);
    entries.push_back(std::move(entry));
  }
  return entries;
}

namespace {

std::vector<LabeledUtterance> map_labels(
    std::vector<std::pair<std::string, std::string>> ids_and_labels,
    std::vector<std::vector<double>> samples, std::vector<std::string>* labels_out) {
  std::map<std::string, std::size_t> index;
  for (const auto& [id, label] : ids_and_labels) index.emplace(label, 0);
  std::size_t next = 0;
  std::vector<std::string> labels;
  for (auto& [label, i] : index) {
    i = next++;
    labels.push_back(label);
  }
  std::vector<LabeledUtterance> out(ids_and_labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].id = ids_and_labels[i].first;
    out[i].label = index.at(ids_and_labels[i].second);
    out[i].samples = std::move(samples[i]);
  }
  if (labels_out != nullptr) *labels_out = std::move(labels);
  return out;
}

}  // namespace

std::vector<LabeledUtterance> load_labeled_corpus(const std::filesystem::path& manifest,
                                                  std::vector<std::string>* labels) {
  const auto entries = read_manifest(manifest);
  std::vector<std::pair<std::string, std::string>> ids;
  std::vector<std::vector<double>> samples;
  for (const auto& entry : entries) {
    ids.emplace_back(entry.path.filename().string(), entry.label);
    samples.push_back(read_wav(entry.path).samples);
  }
  return map_labels(std::move(ids), std::move(samples), labels);
}

std::vector<LabeledUtterance> to_labeled(const std::vector<CorpusUtterance>& corpus) {
  std::vector<std::pair<std::string, std::string>> ids;
  std::vector<std::vector<double>> samples;
  for (const auto& utt : corpus) {
    ids.emplace_back(utt.id + ".wav", utt.speaker);
    samples.push_back(utt.samples);
  }
  return map_labels(std::move(ids), std::move(samples), nullptr);
}

}  // namespace taperlab
