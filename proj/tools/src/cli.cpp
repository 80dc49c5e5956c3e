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


#include "taperlab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "taperlab/corpus.hpp"
#include "taperlab/error.hpp"
#include "taperlab/features.hpp"
#include "taperlab/leakage.hpp"
#include "taperlab/multitaper.hpp"
#include "taperlab/optimizer.hpp"
#include "taperlab/serialize.hpp"
#include "taperlab/wav.hpp"

namespace taperlab::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfig:
    case ErrorKind::kShape:
    case ErrorKind::kConstraint:
      return kExitConfig;
    case ErrorKind::kInput:
      return kExitInput;
    case ErrorKind::kDivergence:
      return kExitDivergence;
    default:
      return kExitInternal;
  }
}

std::ofstream open_output(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

// --- tapers ---------------------------------------------------------------

struct TapersArgs {
  std::string kind = "swce";
  std::size_t num_tapers = 8;
  std::size_t frame_length = 400;
  std::string out;
};

int cmd_tapers(const TapersArgs& a, std::ostream& out) {
  const TaperKind kind = taper_kind_from_string(a.kind);
  std::optional<TaperBank> bank;
  switch (kind) {
    case TaperKind::kSwce:
      bank = make_swce_bank(a.num_tapers, a.frame_length);
      break;
    case TaperKind::kSingleHamming:
      if (a.num_tapers != 1) {
        throw ConfigError("--num-tapers must be 1 for single_hamming");
      }
      bank = make_single_hamming_bank(a.frame_length);
      break;
    default:
      throw ConfigError("--kind must be swce or single_hamming");
  }
  save_taper_bank(a.out, *bank);
  out << "wrote " << bank->num_tapers() << " tapers of length " << bank->frame_length()
      << " to " << a.out << '\n';
  return kExitOk;
}

// --- extract --------------------------------------------------------------

struct ExtractArgs {
  std::string in;
  std::string tapers;
  std::string config;
  std::string out;
  std::string format = "binary";
};

void write_features(const fs::path& path, const FeatureMatrix& features, bool csv) {
  std::ofstream out = open_output(path, !csv);
  if (csv) {
    out << std::setprecision(17);
    write_features_csv(out, features);
  } else {
    write_features_binary(out, features);
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  if (a.format != "binary" && a.format != "csv") {
    throw ConfigError("--format must be binary or csv");
  }
  const bool csv = a.format == "csv";
  FeatureConfig config;
  if (!a.config.empty()) {
    try {
      config = feature_config_from_json(read_text_file(a.config));
    } catch (const ConfigError& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (!a.tapers.empty()) {
    config.estimator = std::make_shared<const TaperBank>(load_taper_bank(a.tapers));
  }
  config.validate();

  const fs::path in(a.in);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  const char* ext = csv ? ".csv" : ".tplf";
  if (fs::is_directory(in)) {
    std::vector<fs::path> wavs;
    for (const auto& entry : fs::directory_iterator(in)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        wavs.push_back(entry.path());
      }
    }
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw InputError("no .wav files in '" + in.string() + "'");
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw InputError("cannot create '" + a.out + "': " + ec.message());
    for (const auto& w : wavs) {
      jobs.emplace_back(w, fs::path(a.out) / (w.stem().string() + ext));
    }
  } else {
    if (!fs::exists(in)) throw InputError("no such input '" + in.string() + "'");
    jobs.emplace_back(in, fs::path(a.out));
  }

  std::vector<std::string> errors(jobs.size());
  std::vector<std::size_t> frames(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const WavClip clip = read_wav(jobs[i].first);
        const FeatureMatrix m =
            extract_utterance(clip.samples, config, jobs[i].first.filename().string());
        write_features(jobs[i].second, m, csv);
        frames[i] = m.frames;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned threads =
      std::min<unsigned>(extraction_threads(), static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Report in input order so the log does not depend on scheduling.
  std::size_t failed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      err << "taperlab: error: " << errors[i] << '\n';
    } else {
      out << jobs[i].first.string() << " -> " << jobs[i].second.string() << " ("
          << frames[i] << "x" << config.num_ceps << ")\n";
    }
  }
  if (failed > 0) {
    err << "taperlab: " << failed << " of " << jobs.size() << " files failed\n";
    return kExitInput;
  }
  return kExitOk;
}

// --- make-corpus ----------------------------------------------------------

struct CorpusArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_make_corpus(const CorpusArgs& a, std::ostream& out) {
  ToyCorpusSpec spec;
  if (!a.spec.empty()) {
    try {
      spec = corpus_spec_from_json(read_text_file(a.spec));
    } catch (const ConfigError& e) {
      throw ConfigError(a.spec + ": " + e.what());
    }
  }
  if (a.seed) spec.seed = *a.seed;
  const auto corpus = synthesize_corpus(spec);
  const fs::path manifest = write_corpus(corpus, a.out);
  out << "wrote " << corpus.size() << " utterances (" << spec.num_samples()
      << " samples each) and " << manifest.string() << '\n';
  return kExitOk;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string config;
  std::string out_bank;
  std::string log;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig config;
  if (!a.config.empty()) {
    try {
      config = train_config_from_json(read_text_file(a.config));
    } catch (const ConfigError& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (a.seed) config.seed = *a.seed;
  std::vector<std::string> labels;
  const auto corpus = load_labeled_corpus(a.manifest, &labels);
  out << "training on " << corpus.size() << " utterances, " << labels.size()
      << " classes, init " << to_string(config.init) << ", constraint "
      << to_string(config.constraint) << '\n';

  const TrainResult result = train(corpus, config);
  if (result.log.skipped_utterances > 0) {
    err << "taperlab: warning: " << result.log.skipped_utterances
        << " utterance visits skipped (shorter than one frame)\n";
  }
  for (const auto& rec : result.log.epochs) {
    out << "epoch " << std::setw(3) << rec.epoch << "  loss " << std::setprecision(6)
        << rec.loss << "  top2 " << rec.top2_mass << "  entropy " << rec.entropy << '\n';
  }
  save_taper_bank(a.out_bank, result.bank);
  if (!a.log.empty()) {
    std::ofstream log = open_output(a.log);
    log << std::setprecision(17);
    write_train_log(log, result.log);
  }
  if (!a.checkpoint.empty()) {
    save_checkpoint(a.checkpoint, result.bank, result.state.classifier);
  }
  return kExitOk;
}

// --- leakage --------------------------------------------------------------

struct LeakageArgs {
  std::vector<std::string> tapers;
  std::string out_report;
  std::string out_spectra;
  std::string out_csv;
  double threshold_db = 80.0;
};

int cmd_leakage(const LeakageArgs& a, std::ostream& out) {
  if (a.tapers.empty()) throw ConfigError("--tapers needs at least one bank file");
  std::vector<NamedEstimator> estimators;
  std::map<std::string, int> seen;
  for (const auto& file : a.tapers) {
    std::string name = fs::path(file).stem().string();
    if (const int n = seen[name]++; n > 0) name += "_" + std::to_string(n + 1);
    estimators.push_back({name, load_taper_bank(file)});
  }
  LeakageOptions options;
  options.threshold_db = a.threshold_db;
  const LeakageReport report = leakage_study(estimators, SyntheticSignalSpec{}, options);

  {
    std::ofstream f = open_output(a.out_report);
    f << leakage_report_to_json(report) << '\n';
  }
  {
    std::ofstream f = open_output(a.out_spectra);
    write_spectra_csv(f, report);
  }
  if (!a.out_csv.empty()) {
    std::ofstream f = open_output(a.out_csv);
    write_leakage_csv(f, report);
  }
  write_leakage_csv(out, report);
  return kExitOk;
}

}  // namespace

unsigned extraction_threads() {
  if (const char* env = std::getenv("TAPERLAB_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learnable multi-taper spectra for speaker features", "taperlab"};
  app.require_subcommand(1);

  TapersArgs tapers;
  auto* tapers_cmd = app.add_subcommand("tapers", "Write a closed-form taper bank as JSON");
  tapers_cmd->add_option("--kind", tapers.kind, "swce or single_hamming")
      ->capture_default_str();
  tapers_cmd->add_option("--num-tapers,-K", tapers.num_tapers, "Number of tapers")
      ->capture_default_str();
  tapers_cmd->add_option("--frame-len,-N", tapers.frame_length, "Taper length in samples")
      ->capture_default_str();
  tapers_cmd->add_option("--out", tapers.out, "Output JSON file")->required();

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "Compute MFCC feature matrices");
  extract_cmd->add_option("--in", extract.in, "WAV file or directory of WAVs")->required();
  extract_cmd->add_option("--tapers", extract.tapers,
                          "Taper bank JSON (default: single Hamming window)");
  extract_cmd->add_option("--config", extract.config, "Feature config JSON");
  extract_cmd->add_option("--out", extract.out, "Output file, or directory for --in DIR")
      ->required();
  extract_cmd->add_option("--format", extract.format, "binary or csv")->capture_default_str();

  CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("make-corpus", "Synthesize a labeled toy corpus");
  corpus_cmd->add_option("--spec", corpus.spec, "Corpus spec JSON (default spec if omitted)");
  corpus_cmd->add_option("--out", corpus.out, "Output directory")->required();
  corpus_cmd->add_option("--seed", corpus.seed, "Override the spec seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Learn taper weights jointly with a classifier");
  train_cmd->add_option("--manifest", train_args.manifest, "manifest.csv (path,label)")
      ->required();
  train_cmd->add_option("--config", train_args.config, "Train config JSON");
  train_cmd->add_option("--out-bank", train_args.out_bank, "Learned taper bank JSON")
      ->required();
  train_cmd->add_option("--log", train_args.log, "Per-epoch JSON-lines log");
  train_cmd->add_option("--checkpoint", train_args.checkpoint,
                        "Prefix for bank and classifier checkpoint files");
  train_cmd->add_option("--seed", train_args.seed, "Override the config seed");

  LeakageArgs leakage;
  auto* leakage_cmd = app.add_subcommand("leakage", "Spectral leakage study on two tones");
  leakage_cmd->add_option("--tapers", leakage.tapers, "Taper bank JSON files")
      ->required()
      ->delimiter(',');
  leakage_cmd->add_option("--out-report", leakage.out_report, "Report JSON")->required();
  leakage_cmd->add_option("--out-spectra", leakage.out_spectra, "Spectra CSV (dB)")
      ->required();
  leakage_cmd->add_option("--out-csv", leakage.out_csv, "Summary CSV");
  leakage_cmd->add_option("--threshold-db", leakage.threshold_db, "Attenuation threshold")
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (tapers_cmd->parsed()) return cmd_tapers(tapers, out);
    if (extract_cmd->parsed()) return cmd_extract(extract, out, err);
    if (corpus_cmd->parsed()) return cmd_make_corpus(corpus, out);
    if (train_cmd->parsed()) return cmd_train(train_args, out, err);
    if (leakage_cmd->parsed()) return cmd_leakage(leakage, out);
  } catch (const Error& e) {
    err << "taperlab: error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "taperlab: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace taperlab::cli
