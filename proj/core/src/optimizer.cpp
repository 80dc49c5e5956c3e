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

#include "taperlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "taperlab/error.hpp"

namespace taperlab {

std::string to_string(LambdaInit init) {
  return init == LambdaInit::kGaussian ? "gaussian" : "swce";
}

std::string to_string(WeightConstraint constraint) {
  return constraint == WeightConstraint::kNone ? "none" : "relu_l1";
}

LambdaInit lambda_init_from_string(const std::string& name) {
  if (name == "gaussian") return LambdaInit::kGaussian;
  if (name == "swce") return LambdaInit::kSwce;
  throw ConfigError("unknown weight init '" + name + "' (gaussian|swce)");
}

WeightConstraint weight_constraint_from_string(const std::string& name) {
  if (name == "none") return WeightConstraint::kNone;
  if (name == "relu_l1" || name == "relu") return WeightConstraint::kReluL1;
  throw ConfigError("unknown weight constraint '" + name + "' (none|relu_l1)");
}

void TrainConfig::validate() const {
  if (num_tapers < 1) throw ConfigError("num_tapers must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!std::isfinite(margin) || margin < 0.0) throw ConfigError("margin must be >= 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be positive");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  features.validate();
}

// ---------------------------------------------------------------------------
// Weight projection.

std::vector<double> project_weights(std::span<const double> lambda) {
  if (lambda.empty()) throw ConfigError("cannot project an empty weight vector");
  const double tolerance =
      4.0 * static_cast<double>(lambda.size()) * std::numeric_limits<double>::epsilon();
  bool on_simplex = true;
  double sum = 0.0;
  for (double x : lambda) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      on_simplex = false;
      break;
    }
    sum += x;
  }
  if (on_simplex && std::abs(sum - 1.0) <= tolerance) {
    return {lambda.begin(), lambda.end()};
  }
  std::vector<double> out(lambda.size());
  sum = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const double x = lambda[j];
    out[j] = (x > kProjectionFloor && std::isfinite(x)) ? x : kProjectionFloor;
    sum += out[j];
  }
  for (double& x : out) x /= sum;
  return out;
}

std::vector<double> project_weights_backward(std::span<const double> lambda,
                                             std::span<const double> grad_projected) {
  if (lambda.size() != grad_projected.size()) {
    throw ShapeError("projection gradient shape mismatch");
  }
  std::vector<double> floored(lambda.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const double x = lambda[j];
    floored[j] = (x > kProjectionFloor && std::isfinite(x)) ? x : kProjectionFloor;
    sum += floored[j];
  }
  // y = r / sum(r)  =>  dr_i = (g_i - <g, y>) / sum(r)
  double dot = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    dot += grad_projected[j] * floored[j] / sum;
  }
  std::vector<double> grad(lambda.size());
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    grad[j] = lambda[j] > kProjectionFloor ? (grad_projected[j] - dot) / sum : 0.0;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Parameters.

void ToyClassifier::normalize_prototypes() {
  for (std::size_t c = 0; c < num_classes; ++c) {
    double* row = prototypes.data() + c * embed_dim;
    double norm = 0.0;
    for (std::size_t e = 0; e < embed_dim; ++e) norm += row[e] * row[e];
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw NumericError("class prototype collapsed to zero");
    for (std::size_t e = 0; e < embed_dim; ++e) row[e] /= norm;
  }
}

ToyClassifier init_classifier(std::size_t input_dim, std::size_t embed_dim,
                              std::size_t num_classes, double margin,
                              double scale, std::uint64_t seed) {
  ToyClassifier classifier;
  classifier.input_dim = input_dim;
  classifier.embed_dim = embed_dim;
  classifier.num_classes = num_classes;
  classifier.margin = margin;
  classifier.scale = scale;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double gain = 1.0 / std::sqrt(static_cast<double>(input_dim));
  classifier.projection.resize(embed_dim * input_dim);
  for (double& w : classifier.projection) w = gain * normal(rng);
  classifier.prototypes.resize(num_classes * embed_dim);
  for (double& w : classifier.prototypes) w = normal(rng);
  classifier.normalize_prototypes();
  return classifier;
}

std::vector<double> TrainState::effective_lambda() const {
  if (constraint == WeightConstraint::kReluL1) return project_weights(lambda);
  return lambda;
}

std::vector<double> TrainState::exported_lambda() const {
  return project_weights(lambda);
}

std::vector<double> init_lambda(const TrainConfig& config) {
  if (config.num_tapers < 1) throw ConfigError("num_tapers must be >= 1");
  if (config.init == LambdaInit::kSwce) {
    return swce_weights(config.num_tapers, config.features.framing.frame_length);
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> lambda(config.num_tapers);
  for (double& x : lambda) x = normal(rng);
  return lambda;
}

TrainState init_state(const TrainConfig& config, std::size_t num_classes) {
  TrainState state;
  state.lambda = init_lambda(config);
  state.classifier =
      init_classifier(config.features.num_ceps, config.embed_dim, num_classes,
                      config.margin, config.scale,
                      config.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  state.lambda_moments = AdamMoments(state.lambda.size());
  state.projection_moments = AdamMoments(state.classifier.projection.size());
  state.prototype_moments = AdamMoments(state.classifier.prototypes.size());
  state.lr = config.lr;
  state.constraint = config.constraint;
  return state;
}

UtteranceSpectra compute_utterance_spectra(const LabeledUtterance& utterance,
                                           const TaperBank& bank,
                                           const FramingConfig& framing) {
  UtteranceSpectra out;
  out.id = utterance.id;
  out.label = utterance.label;
  out.num_tapers = bank.num_tapers();
  out.bins = framing.n_fft / 2 + 1;
  out.frames = num_frames(utterance.samples.size(), framing);
  if (out.frames == 0) return out;
  const auto frames = frame_signal(utterance.samples, framing);
  out.values.resize(out.frames * out.num_tapers * out.bins);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto spectra = sub_spectra(frames[t], bank, framing.n_fft);
    double* dst = out.values.data() + t * out.num_tapers * out.bins;
    for (std::size_t j = 0; j < spectra.size(); ++j) {
      std::copy(spectra[j].values.begin(), spectra[j].values.end(),
                dst + j * out.bins);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward.

JointModel::JointModel(const TrainConfig& config, MfccComputer mfcc)
    : config_(config), mfcc_(std::move(mfcc)) {}

namespace {

constexpr double kCosineClamp = 1.0 - 1e-7;
constexpr double kMinEmbeddingNorm = 1e-12;

}  // namespace

ForwardCache JointModel::forward_loss(std::span<const std::size_t> batch,
                                      const SpectraProvider& spectra,
                                      const TrainState& state) const {
  const ToyClassifier& clf = state.classifier;
  const std::size_t num_ceps = mfcc_.num_ceps();
  if (clf.input_dim != num_ceps) {
    throw ShapeError("classifier input dim != number of cepstra");
  }
  ForwardCache cache;
  cache.step = state.step;
  cache.lambda = state.lambda;
  cache.effective_lambda = state.effective_lambda();
  const double cos_m = std::cos(clf.margin);
  const double sin_m = std::sin(clf.margin);

  std::vector<double> spectrum;
  double total = 0.0;
  for (std::size_t index : batch) {
    const UtteranceSpectra& utt = spectra(index);
    if (utt.frames == 0) {
      ++cache.skipped;
      continue;
    }
    if (utt.num_tapers != cache.effective_lambda.size()) {
      throw ShapeError("utterance sub-spectra have " +
                       std::to_string(utt.num_tapers) + " tapers, lambda has " +
                       std::to_string(cache.effective_lambda.size()));
    }
    if (utt.label >= clf.num_classes) {
      throw InputError("label " + std::to_string(utt.label) + " of '" + utt.id +
                       "' exceeds num_classes");
    }
    UtteranceTrace trace;
    trace.index = index;
    trace.label = utt.label;
    trace.frames.resize(utt.frames);
    trace.pooled.assign(num_ceps, 0.0);
    spectrum.resize(utt.bins);
    for (std::size_t t = 0; t < utt.frames; ++t) {
      combine_sub_spectra(utt.frame(t), utt.bins, cache.effective_lambda, spectrum);
      mfcc_.compute(spectrum, trace.frames[t]);
      for (std::size_t k = 0; k < num_ceps; ++k) {
        trace.pooled[k] += trace.frames[t].cepstra[k];
      }
    }
    const double inv_frames = 1.0 / static_cast<double>(utt.frames);
    for (double& u : trace.pooled) u *= inv_frames;

    trace.embedding.assign(clf.embed_dim, 0.0);
    double norm2 = 0.0;
    for (std::size_t e = 0; e < clf.embed_dim; ++e) {
      const double* row = clf.projection.data() + e * num_ceps;
      double z = 0.0;
      for (std::size_t k = 0; k < num_ceps; ++k) z += row[k] * trace.pooled[k];
      trace.embedding[e] = z;
      norm2 += z * z;
    }
    trace.embedding_norm = std::max(std::sqrt(norm2), kMinEmbeddingNorm);
    trace.normalized.resize(clf.embed_dim);
    for (std::size_t e = 0; e < clf.embed_dim; ++e) {
      trace.normalized[e] = trace.embedding[e] / trace.embedding_norm;
    }

    trace.cosines.resize(clf.num_classes);
    std::vector<double> logits(clf.num_classes);
    for (std::size_t c = 0; c < clf.num_classes; ++c) {
      const double* proto = clf.prototypes.data() + c * clf.embed_dim;
      double cosine = 0.0;
      for (std::size_t e = 0; e < clf.embed_dim; ++e) cosine += proto[e] * trace.normalized[e];
      trace.cosines[c] = cosine;
      logits[c] = clf.scale * cosine;
    }
    double target = trace.cosines[utt.label];
    if (std::abs(target) > kCosineClamp) {
      target = std::copysign(kCosineClamp, target);
      trace.target_clamped = true;
    }
    trace.target_cosine = target;
    const double sine = std::sqrt(1.0 - target * target);
    logits[utt.label] = clf.scale * (target * cos_m - sine * sin_m);

    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    trace.probabilities.resize(clf.num_classes);
    for (std::size_t c = 0; c < clf.num_classes; ++c) {
      trace.probabilities[c] = std::exp(logits[c] - max_logit);
      denom += trace.probabilities[c];
    }
    for (double& p : trace.probabilities) p /= denom;
    trace.loss = max_logit + std::log(denom) - logits[utt.label];
    total += trace.loss;
    cache.utterances.push_back(std::move(trace));
  }
  if (cache.utterances.empty()) {
    throw InputError("batch has no utterance with at least one frame");
  }
  cache.loss = total / static_cast<double>(cache.utterances.size());
  return cache;
}

Gradients JointModel::backward(const ForwardCache& cache,
                               const SpectraProvider& spectra,
                               const TrainState& state) const {
  if (cache.step != state.step || cache.lambda != state.lambda) {
    throw StateError("forward cache is stale: produced at step " +
                     std::to_string(cache.step) + ", state is at step " +
                     std::to_string(state.step));
  }
  const ToyClassifier& clf = state.classifier;
  const std::size_t num_ceps = mfcc_.num_ceps();
  const std::size_t num_filters = mfcc_.filterbank().num_filters();
  const std::size_t num_tapers = cache.effective_lambda.size();
  const double cos_m = std::cos(clf.margin);
  const double sin_m = std::sin(clf.margin);
  const double batch_scale = 1.0 / static_cast<double>(cache.utterances.size());

  Gradients grads;
  grads.projection.assign(clf.projection.size(), 0.0);
  grads.prototypes.assign(clf.prototypes.size(), 0.0);
  std::vector<double> grad_effective(num_tapers, 0.0);

  std::vector<double> d_cos(clf.num_classes);
  std::vector<double> d_x(clf.embed_dim);
  std::vector<double> d_z(clf.embed_dim);
  std::vector<double> d_u(num_ceps);
  std::vector<double> d_log(num_filters);
  for (const UtteranceTrace& trace : cache.utterances) {
    // Softmax cross-entropy: d loss / d logit = p - onehot.
    for (std::size_t c = 0; c < clf.num_classes; ++c) {
      const double d_logit =
          (trace.probabilities[c] - (c == trace.label ? 1.0 : 0.0)) * batch_scale;
      d_cos[c] = clf.scale * d_logit;
    }
    // Target logit s*cos(theta + m) = s*(cos*cos_m - sin*sin_m).
    if (trace.target_clamped) {
      d_cos[trace.label] = 0.0;
    } else {
      const double cosine = trace.target_cosine;
      const double sine = std::sqrt(1.0 - cosine * cosine);
      d_cos[trace.label] *= cos_m + sin_m * cosine / sine;
    }

    std::fill(d_x.begin(), d_x.end(), 0.0);
    for (std::size_t c = 0; c < clf.num_classes; ++c) {
      const double g = d_cos[c];
      const double* proto = clf.prototypes.data() + c * clf.embed_dim;
      double* d_proto = grads.prototypes.data() + c * clf.embed_dim;
      for (std::size_t e = 0; e < clf.embed_dim; ++e) {
        d_x[e] += g * proto[e];
        d_proto[e] += g * trace.normalized[e];
      }
    }
    // x = z/|z|  =>  dz = (dx - x <x, dx>) / |z|
    double x_dot = 0.0;
    for (std::size_t e = 0; e < clf.embed_dim; ++e) x_dot += trace.normalized[e] * d_x[e];
    for (std::size_t e = 0; e < clf.embed_dim; ++e) {
      d_z[e] = (d_x[e] - trace.normalized[e] * x_dot) / trace.embedding_norm;
    }
    std::fill(d_u.begin(), d_u.end(), 0.0);
    for (std::size_t e = 0; e < clf.embed_dim; ++e) {
      const double* row = clf.projection.data() + e * num_ceps;
      double* d_row = grads.projection.data() + e * num_ceps;
      for (std::size_t k = 0; k < num_ceps; ++k) {
        d_row[k] += d_z[e] * trace.pooled[k];
        d_u[k] += d_z[e] * row[k];
      }
    }

    // Mean pooling spreads d_u evenly; the log-energy gradient is then the
    // same for every frame.
    const UtteranceSpectra& utt = spectra(trace.index);
    const double inv_frames = 1.0 / static_cast<double>(utt.frames);
    for (double& g : d_u) g *= inv_frames;
    mfcc_.dct().transpose(d_u, d_log);

    std::vector<double> d_spectrum(utt.bins);
    for (std::size_t t = 0; t < utt.frames; ++t) {
      mfcc_.backward_from_log(trace.frames[t], d_log, d_spectrum);
      const auto block = utt.frame(t);
      // S = sum_j lambda_j P_j  =>  d lambda_j = <P_j, dS>
      for (std::size_t j = 0; j < num_tapers; ++j) {
        const double* sub = block.data() + j * utt.bins;
        double acc = 0.0;
        for (std::size_t f = 0; f < utt.bins; ++f) acc += sub[f] * d_spectrum[f];
        grad_effective[j] += acc;
      }
    }
  }

  if (state.constraint == WeightConstraint::kReluL1) {
    grads.lambda = project_weights_backward(state.lambda, grad_effective);
  } else {
    grads.lambda = std::move(grad_effective);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam.

namespace {

void adam_update(std::vector<double>& params, std::span<const double> grads,
                 AdamMoments& moments, double lr, const AdamOptions& options,
                 double correction1, double correction2) {
  if (grads.size() != params.size() || moments.m.size() != params.size() ||
      moments.v.size() != params.size()) {
    throw ShapeError("gradient shape does not match parameter shape");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = options.beta1 * moments.m[i] + (1.0 - options.beta1) * g;
    moments.v[i] = options.beta2 * moments.v[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = moments.m[i] / correction1;
    const double v_hat = moments.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
  }
}

}  // namespace

void adam_step(TrainState& state, const Gradients& gradients, double lr,
               const AdamOptions& options) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  adam_update(state.lambda, gradients.lambda, state.lambda_moments, lr, options,
              correction1, correction2);
  adam_update(state.classifier.projection, gradients.projection,
              state.projection_moments, lr, options, correction1, correction2);
  adam_update(state.classifier.prototypes, gradients.prototypes,
              state.prototype_moments, lr, options, correction1, correction2);
  state.classifier.normalize_prototypes();
  if (state.constraint == WeightConstraint::kReluL1) {
    state.lambda = project_weights(state.lambda);
  }
}

// ---------------------------------------------------------------------------
// Training loop.

double top2_mass(std::span<const double> weights) {
  if (weights.empty()) return 0.0;
  std::vector<double> sorted(weights.begin(), weights.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted.size() == 1 ? sorted[0] : sorted[0] + sorted[1];
}

double weight_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double p : weights) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

ConcentrationReport weight_concentration(const TrainLog& log) {
  ConcentrationReport report;
  for (const EpochRecord& record : log.epochs) {
    report.top2_mass.push_back(top2_mass(record.lambda));
    report.entropy.push_back(weight_entropy(record.lambda));
  }
  return report;
}

namespace {

EpochRecord make_record(std::size_t epoch, double loss, const TrainState& state) {
  EpochRecord record;
  record.epoch = epoch;
  record.loss = loss;
  record.lambda = state.exported_lambda();
  record.lambda_raw = state.lambda;
  record.top2_mass = top2_mass(record.lambda);
  record.entropy = weight_entropy(record.lambda);
  return record;
}

void check_finite(double loss, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "training diverged at epoch " << epoch << ", step " << step
        << ": loss = " << loss;
    throw DivergenceError(msg.str());
  }
}

}  // namespace

TrainResult train(std::span<const LabeledUtterance> corpus,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  std::map<std::size_t, std::size_t> per_class;
  for (const auto& utt : corpus) ++per_class[utt.label];
  if (per_class.size() < 2) throw ConfigError("training needs at least two classes");
  for (const auto& [label, count] : per_class) {
    if (count < 2) {
      throw ConfigError("class " + std::to_string(label) +
                        " has fewer than two utterances");
    }
  }
  const std::size_t max_label = per_class.rbegin()->first;
  std::size_t num_classes = config.num_classes == 0 ? max_label + 1 : config.num_classes;
  if (num_classes <= max_label) {
    throw ConfigError("num_classes is smaller than the largest label + 1");
  }

  const FramingConfig& framing = config.features.framing;
  const TaperBank tapers = make_swce_bank(config.num_tapers, framing.frame_length);

  // Canonical order: sorted by utterance id.
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corpus[a].id < corpus[b].id;
  });

  std::vector<UtteranceSpectra> cache;
  UtteranceSpectra scratch;
  if (!options.recompute_spectra) {
    cache.reserve(order.size());
    for (std::size_t i : order) {
      cache.push_back(compute_utterance_spectra(corpus[i], tapers, framing));
    }
  }
  const SpectraProvider provider = [&](std::size_t index) -> const UtteranceSpectra& {
    if (!options.recompute_spectra) return cache.at(index);
    scratch = compute_utterance_spectra(corpus[order.at(index)], tapers, framing);
    return scratch;
  };

  JointModel model(config, MfccComputer(config.features));
  TrainState state = init_state(config, num_classes);

  std::vector<std::size_t> all(order.size());
  std::iota(all.begin(), all.end(), 0);

  TrainLog log;
  {
    const ForwardCache eval = model.forward_loss(all, provider, state);
    check_finite(eval.loss, 0, 0);
    log.skipped_utterances = eval.skipped;
    log.epochs.push_back(make_record(0, eval.loss, state));
  }

  std::mt19937_64 shuffle_rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> perm = all;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < perm.size(); begin += config.batch_size) {
      const std::size_t end = std::min(perm.size(), begin + config.batch_size);
      std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                     perm.begin() + static_cast<std::ptrdiff_t>(end));
      // Fixed accumulation order within a batch.
      std::sort(batch.begin(), batch.end());
      ForwardCache fwd;
      try {
        fwd = model.forward_loss(batch, provider, state);
      } catch (const InputError&) {
        continue;  // every utterance in this batch was too short
      }
      check_finite(fwd.loss, epoch, state.step);
      const Gradients grads = model.backward(fwd, provider, state);
      adam_step(state, grads, config.lr);
      ++log.steps;
      if (options.on_step) options.on_step(state);
    }
    const ForwardCache eval = model.forward_loss(all, provider, state);
    check_finite(eval.loss, epoch, state.step);
    log.epochs.push_back(make_record(epoch, eval.loss, state));
  }

  TaperBank bank = tapers.with_weights(state.exported_lambda());
  return TrainResult{std::move(bank), std::move(log), std::move(state)};
}

}  // namespace taperlab
