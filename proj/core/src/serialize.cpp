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

#include "taperlab/serialize.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "taperlab/error.hpp"

namespace taperlab {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed " + what + " JSON: " + e.what());
  }
}

// Reads typed fields from a JSON object, naming the field in every error and
// rejecting keys nobody asked for.
class FieldReader {
 public:
  FieldReader(const json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) {
      throw ConfigError(context_.empty() ? "expected a JSON object"
                                         : "field '" + context_ + "': expected an object");
    }
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return object_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) fail(key, "expected a non-negative integer");
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (x >= 0.0 && std::floor(x) == x && x < 9.0e15) {
        return static_cast<std::uint64_t>(x);
      }
    }
    fail(key, "expected a non-negative integer");
    return 0;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string path(const std::string& key) const {
    return context_.empty() ? key : context_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError("field '" + path(key) + "': " + message);
  }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("field '" + path(it.key()) + "': unknown key");
      }
    }
  }

 private:
  const json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

// Re-throws domain validation failures with the document name attached.
template <typename F>
void validate_as(const std::string& what, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::vector<double> number_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError("field '" + field + "': expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError("field '" + field + "[" + std::to_string(i) +
                        "]': expected a number");
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TaperBank

std::string taper_bank_to_json(const TaperBank& bank) {
  json j;
  j["kind"] = to_string(bank.kind());
  j["K"] = bank.num_tapers();
  j["N"] = bank.frame_length();
  j["weights"] = bank.weights();
  j["tapers"] = bank.tapers();
  return j.dump(1);
}

TaperBank taper_bank_from_json(std::string_view text) {
  const json doc = parse_json(text, "taper bank");
  FieldReader reader(doc, "");
  for (const char* key : {"kind", "K", "N", "weights", "tapers"}) {
    if (!reader.has(key)) reader.fail(key, "missing");
  }
  const TaperKind kind = [&] {
    try {
      return taper_kind_from_string(reader.string("kind", ""));
    } catch (const ConfigError& e) {
      reader.fail("kind", e.what());
    }
  }();
  const auto k = reader.unsigned_integer("K", 0);
  const auto n = reader.unsigned_integer("N", 0);
  std::vector<double> weights = number_array(reader.raw("weights"), "weights");
  const json& tapers_json = reader.raw("tapers");
  if (!tapers_json.is_array()) reader.fail("tapers", "expected an array of arrays");
  std::vector<std::vector<double>> tapers;
  for (std::size_t j = 0; j < tapers_json.size(); ++j) {
    tapers.push_back(number_array(tapers_json[j], "tapers[" + std::to_string(j) + "]"));
  }
  reader.finish();
  if (weights.size() != k) reader.fail("weights", "expected K = " + std::to_string(k) + " entries");
  if (tapers.size() != k) reader.fail("tapers", "expected K = " + std::to_string(k) + " tapers");
  for (std::size_t j = 0; j < tapers.size(); ++j) {
    if (tapers[j].size() != n) {
      reader.fail("tapers[" + std::to_string(j) + "]",
                  "expected N = " + std::to_string(n) + " samples");
    }
  }
  try {
    return TaperBank(kind, std::move(tapers), std::move(weights));
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid taper bank: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void save_taper_bank(const std::filesystem::path& path, const TaperBank& bank) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << taper_bank_to_json(bank) << '\n';
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

TaperBank load_taper_bank(const std::filesystem::path& path) {
  try {
    return taper_bank_from_json(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  char b[8];
  for (int i = 0; i < bytes; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, bytes);
}

std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (in.gcount() != bytes) throw InputError("truncated TPLF container");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_container(std::ostream& out, const MatrixContainer& matrix) {
  if (matrix.data.size() != matrix.rows * matrix.dims) {
    throw ShapeError("container payload does not match rows x dims");
  }
  out.write(kContainerMagic, 4);
  put_le(out, kContainerVersion, 4);
  put_le(out, matrix.rows, 8);
  put_le(out, matrix.dims, 8);
  put_le(out, matrix.config_hash, 8);
  for (double x : matrix.data) put_le(out, std::bit_cast<std::uint64_t>(x), 8);
}

MatrixContainer read_container(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kContainerMagic, 4) != 0) {
    throw InputError("not a TPLF container (bad magic)");
  }
  const auto version = get_le(in, 4);
  if (version != kContainerVersion) {
    throw InputError("unsupported TPLF version " + std::to_string(version));
  }
  MatrixContainer matrix;
  matrix.rows = get_le(in, 8);
  matrix.dims = get_le(in, 8);
  matrix.config_hash = get_le(in, 8);
  if (matrix.dims != 0 && matrix.rows > (std::uint64_t{1} << 40) / matrix.dims) {
    throw InputError("TPLF container dimensions are implausible");
  }
  matrix.data.resize(matrix.rows * matrix.dims);
  for (double& x : matrix.data) x = std::bit_cast<double>(get_le(in, 8));
  return matrix;
}

void write_features_binary(std::ostream& out, const FeatureMatrix& features) {
  write_container(out, MatrixContainer{features.frames, features.dims,
                                       features.config_hash, features.data});
}

FeatureMatrix read_features_binary(std::istream& in) {
  MatrixContainer m = read_container(in);
  FeatureMatrix features;
  features.frames = m.rows;
  features.dims = m.dims;
  features.config_hash = m.config_hash;
  features.data = std::move(m.data);
  return features;
}

void write_features_csv(std::ostream& out, const FeatureMatrix& features) {
  char buf[64];
  for (std::size_t i = 0; i < features.frames; ++i) {
    const auto row = features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k > 0) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), row[k]);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

FeatureMatrix read_features_csv(std::istream& in) {
  FeatureMatrix features;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t dims = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw InputError("malformed feature CSV value");
      features.data.push_back(v);
      ++dims;
      p = res.ptr;
      if (p < end) {
        if (*p != ',') throw InputError("malformed feature CSV separator");
        ++p;
      }
    }
    if (features.frames == 0) {
      features.dims = dims;
    } else if (dims != features.dims) {
      throw InputError("feature CSV rows differ in width");
    }
    ++features.frames;
  }
  return features;
}

// ---------------------------------------------------------------------------
// Config documents

namespace {

void read_feature_fields(FieldReader& r, FeatureConfig& c) {
  c.framing.sample_rate = r.number("sample_rate", c.framing.sample_rate);
  c.framing.frame_length = r.unsigned_integer("frame_length", c.framing.frame_length);
  c.framing.frame_shift = r.unsigned_integer("frame_shift", c.framing.frame_shift);
  c.framing.n_fft = r.unsigned_integer("n_fft", c.framing.n_fft);
  c.framing.preemphasis = r.number("preemphasis", c.framing.preemphasis);
  c.framing.dither = r.number("dither", c.framing.dither);
  c.framing.dither_seed = r.unsigned_integer("dither_seed", c.framing.dither_seed);
  c.num_filters = r.unsigned_integer("num_filters", c.num_filters);
  c.num_ceps = r.unsigned_integer("num_ceps", c.num_ceps);
  c.f_low = r.number("f_low", c.f_low);
  c.f_high = r.number("f_high", c.f_high);
  c.log_floor = r.number("log_floor", c.log_floor);
  c.normalize_filters = r.boolean("normalize_filters", c.normalize_filters);
}

json feature_fields(const FeatureConfig& c) {
  json j;
  j["sample_rate"] = c.framing.sample_rate;
  j["frame_length"] = c.framing.frame_length;
  j["frame_shift"] = c.framing.frame_shift;
  j["n_fft"] = c.framing.n_fft;
  j["preemphasis"] = c.framing.preemphasis;
  j["dither"] = c.framing.dither;
  j["dither_seed"] = c.framing.dither_seed;
  j["num_filters"] = c.num_filters;
  j["num_ceps"] = c.num_ceps;
  j["f_low"] = c.f_low;
  j["f_high"] = c.f_high;
  j["log_floor"] = c.log_floor;
  j["normalize_filters"] = c.normalize_filters;
  return j;
}

}  // namespace

FeatureConfig feature_config_from_json(std::string_view text) {
  const json doc = parse_json(text, "feature config");
  FieldReader reader(doc, "");
  FeatureConfig config;
  read_feature_fields(reader, config);
  reader.finish();
  validate_as("feature config", [&] { config.validate(); });
  return config;
}

std::string feature_config_to_json(const FeatureConfig& config) {
  return feature_fields(config).dump(2);
}

TrainConfig train_config_from_json(std::string_view text) {
  const json doc = parse_json(text, "train config");
  FieldReader r(doc, "");
  TrainConfig c;
  try {
    c.init = lambda_init_from_string(r.string("init", to_string(c.init)));
  } catch (const ConfigError& e) {
    r.fail("init", e.what());
  }
  try {
    c.constraint = weight_constraint_from_string(r.string("constraint", to_string(c.constraint)));
  } catch (const ConfigError& e) {
    r.fail("constraint", e.what());
  }
  c.num_tapers = r.unsigned_integer("num_tapers", c.num_tapers);
  c.lr = r.number("lr", c.lr);
  c.batch_size = r.unsigned_integer("batch_size", c.batch_size);
  c.epochs = r.unsigned_integer("epochs", c.epochs);
  c.seed = r.unsigned_integer("seed", c.seed);
  c.margin = r.number("margin", c.margin);
  c.scale = r.number("scale", c.scale);
  c.embed_dim = r.unsigned_integer("embed_dim", c.embed_dim);
  c.num_classes = r.unsigned_integer("num_classes", c.num_classes);
  if (r.has("features")) {
    FieldReader fr(r.raw("features"), "features");
    read_feature_fields(fr, c.features);
    fr.finish();
  }
  r.finish();
  validate_as("train config", [&] { c.validate(); });
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["init"] = to_string(c.init);
  j["constraint"] = to_string(c.constraint);
  j["num_tapers"] = c.num_tapers;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["margin"] = c.margin;
  j["scale"] = c.scale;
  j["embed_dim"] = c.embed_dim;
  j["num_classes"] = c.num_classes;
  j["features"] = feature_fields(c.features);
  return j.dump(2);
}

ToyCorpusSpec corpus_spec_from_json(std::string_view text) {
  const json doc = parse_json(text, "corpus spec");
  FieldReader r(doc, "");
  ToyCorpusSpec spec;
  spec.num_speakers = r.unsigned_integer("num_speakers", spec.num_speakers);
  spec.utterances_per_speaker =
      r.unsigned_integer("utterances_per_speaker", spec.utterances_per_speaker);
  spec.duration_s = r.number("duration_s", spec.duration_s);
  spec.seed = r.unsigned_integer("seed", spec.seed);
  spec.sample_rate = r.number("sample_rate", spec.sample_rate);
  spec.snr_db = r.number("snr_db", spec.snr_db);
  if (r.has("templates")) {
    const json& list = r.raw("templates");
    if (!list.is_array()) r.fail("templates", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      FieldReader tr(list[i], "templates[" + std::to_string(i) + "]");
      SpeakerTemplate t;
      t.f1 = tr.number("f1", t.f1);
      t.f2 = tr.number("f2", t.f2);
      t.jitter = tr.number("jitter", t.jitter);
      tr.finish();
      spec.templates.push_back(t);
    }
  }
  r.finish();
  validate_as("corpus spec", [&] { spec.validate(); });
  return spec;
}

// ---------------------------------------------------------------------------
// Training artifacts

void write_train_log(std::ostream& out, const TrainLog& log) {
  for (const EpochRecord& rec : log.epochs) {
    json j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    j["lambda"] = rec.lambda;
    j["lambda_raw"] = rec.lambda_raw;
    j["top2_mass"] = rec.top2_mass;
    j["entropy"] = rec.entropy;
    out << j.dump() << '\n';
  }
}

TrainLog read_train_log(std::istream& in) {
  TrainLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_json(line, "training log line " + std::to_string(line_no));
    FieldReader r(j, "");
    EpochRecord rec;
    rec.epoch = r.unsigned_integer("epoch", 0);
    rec.loss = r.number("loss", 0.0);
    if (r.has("lambda")) rec.lambda = number_array(r.raw("lambda"), "lambda");
    if (r.has("lambda_raw")) rec.lambda_raw = number_array(r.raw("lambda_raw"), "lambda_raw");
    rec.top2_mass = r.number("top2_mass", 0.0);
    rec.entropy = r.number("entropy", 0.0);
    r.finish();
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

void save_checkpoint(const std::filesystem::path& prefix, const TaperBank& bank,
                     const ToyClassifier& classifier) {
  auto with_suffix = [&](const char* suffix) {
    return std::filesystem::path(prefix.string() + suffix);
  };
  save_taper_bank(with_suffix(".bank.json"), bank);
  auto write = [&](const std::filesystem::path& path, std::uint64_t rows,
                   std::uint64_t dims, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    write_container(out, MatrixContainer{rows, dims, 0, data});
  };
  write(with_suffix(".projection.tplf"), classifier.embed_dim, classifier.input_dim,
        classifier.projection);
  write(with_suffix(".prototypes.tplf"), classifier.num_classes, classifier.embed_dim,
        classifier.prototypes);
}

// ---------------------------------------------------------------------------
// Leakage

namespace {

std::string center_key(double hz) {
  std::ostringstream s;
  s << hz;
  return s.str();
}

std::string csv_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string leakage_report_to_json(const LeakageReport& report) {
  json j;
  j["signal"] = {{"bin_indices", report.spec.bin_indices},
                 {"sample_rate", report.spec.sample_rate},
                 {"n_fft", report.spec.n_fft},
                 {"duration", report.spec.duration}};
  j["procedure"] = {
      {"threshold_db", report.options.threshold_db},
      {"floor", report.options.floor},
      {"is_distance", "mean over bins of P/Q - log(P/Q) - 1; estimate divided by its peak"},
      {"width", "first bins at or below threshold relative to the peak inside the "
                "tone's limits; limits are midpoints to neighbouring tones or the "
                "spectrum edges; clamped sides are flagged"},
      {"analysis_frame", "first N samples of the signal, N = taper length"}};
  json entries = json::array();
  for (const LeakageEntry& e : report.entries) {
    json widths = json::object();
    for (const auto& [hz, w] : e.widths) {
      widths[center_key(hz)] = {{"width_hz", w.width_hz},
                                {"interpolated_width_hz", w.interpolated_width_hz},
                                {"center_bin", w.center_bin},
                                {"peak_bin", w.peak_bin},
                                {"left_bin", w.left_bin},
                                {"right_bin", w.right_bin},
                                {"clamped_left", w.clamped_left},
                                {"clamped_right", w.clamped_right}};
    }
    entries.push_back({{"estimator", e.name},
                       {"is_distance", e.is_distance},
                       {"widths", widths},
                       {"spectrum", e.spectrum.values}});
  }
  j["estimators"] = entries;
  return j.dump(1);
}

void write_leakage_csv(std::ostream& out, const LeakageReport& report) {
  out << "estimator,is_distance";
  for (double hz : report.options.centers_hz) out << ",width_" << center_key(hz);
  out << '\n';
  for (const LeakageEntry& e : report.entries) {
    out << e.name << ',' << csv_number(e.is_distance);
    for (double hz : report.options.centers_hz) out << ',' << csv_number(e.widths.at(hz).width_hz);
    out << '\n';
  }
}

void write_spectra_csv(std::ostream& out, const LeakageReport& report) {
  out << "bin_hz";
  for (const LeakageEntry& e : report.entries) out << ',' << e.name;
  out << '\n';
  if (report.entries.empty()) return;
  std::vector<double> peaks;
  for (const LeakageEntry& e : report.entries) {
    peaks.push_back(*std::max_element(e.spectrum.values.begin(), e.spectrum.values.end()));
  }
  const std::size_t bins = report.entries.front().spectrum.size();
  const double bin_width = report.entries.front().spectrum.bin_width;
  for (std::size_t f = 0; f < bins; ++f) {
    out << csv_number(bin_width * static_cast<double>(f));
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
      const double rel = std::max(report.entries[i].spectrum.values[f] / peaks[i],
                                  report.options.floor);
      out << ',' << csv_number(10.0 * std::log10(rel));
    }
    out << '\n';
  }
}

}  // namespace taperlab
