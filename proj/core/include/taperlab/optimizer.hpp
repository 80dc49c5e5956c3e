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

// Joint learning of multi-taper weights and a small speaker classifier.
//
// Per utterance the model is
//
//   S_t(f) = sum_j lambda_hat(j) P_tj(f)            (sub-spectra P cached)
//   c_t    = DCT(log(max(M S_t, floor)))            (MFCC per frame)
//   u      = mean_t c_t                             (temporal pooling)
//   x      = A u / |A u|                            (projection, length norm)
//   J      = AAM-softmax(x, prototypes, label; m, s)
//
// and lambda and (A, prototypes) are updated together by Adam. Under the
// relu_l1 constraint lambda_hat = project_weights(lambda) and the stored
// lambda is re-projected after every step.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "taperlab/features.hpp"
#include "taperlab/multitaper.hpp"

namespace taperlab {

enum class LambdaInit { kGaussian, kSwce };
enum class WeightConstraint { kNone, kReluL1 };

std::string to_string(LambdaInit init);
std::string to_string(WeightConstraint constraint);
LambdaInit lambda_init_from_string(const std::string& name);
WeightConstraint weight_constraint_from_string(const std::string& name);

struct TrainConfig {
  LambdaInit init = LambdaInit::kSwce;
  WeightConstraint constraint = WeightConstraint::kReluL1;
  std::size_t num_tapers = 8;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double margin = 0.2;  // radians
  double scale = 30.0;
  std::size_t embed_dim = 32;
  // 0 means "number of distinct labels in the corpus".
  std::size_t num_classes = 0;
  FeatureConfig features;

  void validate() const;
};

// Floor applied inside project_weights.
inline constexpr double kProjectionFloor = 1e-8;

// r = max(max(lambda, 0), eps); r / sum(r). Inputs already on the
// eps-floored simplex (within a few ulps) are returned unchanged, which
// makes the map exactly idempotent.
std::vector<double> project_weights(std::span<const double> lambda);

// d(loss)/d(lambda) given d(loss)/d(project_weights(lambda)).
std::vector<double> project_weights_backward(std::span<const double> lambda,
                                             std::span<const double> grad_projected);

struct ToyClassifier {
  std::size_t input_dim = 0;
  std::size_t embed_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> projection;  // embed_dim x input_dim, row-major
  std::vector<double> prototypes;  // num_classes x embed_dim, unit rows
  double margin = 0.2;
  double scale = 30.0;

  void normalize_prototypes();
};

ToyClassifier init_classifier(std::size_t input_dim, std::size_t embed_dim,
                              std::size_t num_classes, double margin,
                              double scale, std::uint64_t seed);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct TrainState {
  std::vector<double> lambda;  // as stored; projected on use under relu_l1
  ToyClassifier classifier;
  AdamMoments lambda_moments;
  AdamMoments projection_moments;
  AdamMoments prototype_moments;
  std::uint64_t step = 0;
  double lr = 1e-3;
  WeightConstraint constraint = WeightConstraint::kReluL1;

  // Weights actually multiplying the sub-spectra.
  std::vector<double> effective_lambda() const;
  // Exported weights: always projected (strictly positive, sum 1).
  std::vector<double> exported_lambda() const;
};

// Gaussian init draws K standard normals from `config.seed`; swce init uses
// the closed-form weights at config.features.framing.frame_length.
std::vector<double> init_lambda(const TrainConfig& config);

TrainState init_state(const TrainConfig& config, std::size_t num_classes);

// Cached per-frame sub-spectra of one utterance: frames x K x bins.
struct UtteranceSpectra {
  std::string id;
  std::size_t label = 0;
  std::size_t frames = 0;
  std::size_t num_tapers = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(values).subspan(t * num_tapers * bins,
                                                   num_tapers * bins);
  }
};

struct LabeledUtterance {
  std::string id;
  std::size_t label = 0;
  std::vector<double> samples;
};

UtteranceSpectra compute_utterance_spectra(const LabeledUtterance& utterance,
                                           const TaperBank& bank,
                                           const FramingConfig& framing);

// Source of sub-spectra for a batch: either a precomputed cache or a
// recomputation from raw frames on every request.
using SpectraProvider = std::function<const UtteranceSpectra&(std::size_t index)>;

struct Gradients {
  std::vector<double> lambda;      // w.r.t. the stored (unconstrained) lambda
  std::vector<double> projection;  // embed_dim x input_dim
  std::vector<double> prototypes;  // num_classes x embed_dim
};

// Per-utterance intermediates retained for the backward pass.
struct UtteranceTrace {
  std::size_t index = 0;
  std::size_t label = 0;
  std::vector<MfccTrace> frames;
  std::vector<double> pooled;     // u
  std::vector<double> embedding;  // z = A u
  double embedding_norm = 0.0;
  std::vector<double> normalized;  // x
  std::vector<double> cosines;
  std::vector<double> probabilities;
  double target_cosine = 0.0;
  bool target_clamped = false;
  double loss = 0.0;
};

struct ForwardCache {
  std::uint64_t step = 0;  // TrainState::step at forward time
  std::vector<double> lambda;
  std::vector<double> effective_lambda;
  std::vector<UtteranceTrace> utterances;
  double loss = 0.0;
  std::size_t skipped = 0;  // zero-frame utterances
};

class JointModel {
 public:
  JointModel(const TrainConfig& config, MfccComputer mfcc);

  const TrainConfig& config() const { return config_; }
  const MfccComputer& mfcc() const { return mfcc_; }

  // Mean AAM-softmax loss over `batch` (indices handed to `spectra`). Keeps
  // everything backward() needs. Zero-frame utterances are skipped; an empty
  // effective batch throws InputError.
  ForwardCache forward_loss(std::span<const std::size_t> batch,
                            const SpectraProvider& spectra,
                            const TrainState& state) const;

  // Analytic gradients. Throws StateError if `cache` was produced under a
  // different state step.
  Gradients backward(const ForwardCache& cache, const SpectraProvider& spectra,
                     const TrainState& state) const;

 private:
  TrainConfig config_;
  MfccComputer mfcc_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One Adam update of every parameter; prototypes re-normalized; lambda
// re-projected under relu_l1.
void adam_step(TrainState& state, const Gradients& gradients, double lr,
               const AdamOptions& options = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double loss = 0.0;
  std::vector<double> lambda;      // exported (projected) weights
  std::vector<double> lambda_raw;  // stored weights
  double top2_mass = 0.0;
  double entropy = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
  std::size_t skipped_utterances = 0;
};

struct TrainResult {
  TaperBank bank;
  TrainLog log;
  TrainState state;
};

struct TrainOptions {
  // Recompute sub-spectra from raw frames on every request instead of
  // caching them.
  bool recompute_spectra = false;
  // Called after every optimizer step.
  std::function<void(const TrainState&)> on_step;
};

// Throws ConfigError for fewer than two classes or fewer than two
// utterances per class; DivergenceError on a non-finite loss.
TrainResult train(std::span<const LabeledUtterance> corpus,
                  const TrainConfig& config, const TrainOptions& options = {});

struct ConcentrationReport {
  std::vector<double> top2_mass;  // per epoch
  std::vector<double> entropy;    // per epoch, natural log
};

double top2_mass(std::span<const double> weights);
double weight_entropy(std::span<const double> weights);
ConcentrationReport weight_concentration(const TrainLog& log);

}  // namespace taperlab
