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


#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "taperlab/corpus.hpp"
#include "taperlab/error.hpp"
#include "taperlab/optimizer.hpp"

using namespace taperlab;
using taperlab::testing::gaussian_vector;

namespace {

ToyCorpusSpec small_spec() {
  ToyCorpusSpec spec;
  spec.num_speakers = 3;
  spec.utterances_per_speaker = 3;
  spec.duration_s = 0.1;
  spec.seed = 11;
  return spec;
}

struct Fixture {
  TrainConfig config;
  std::vector<LabeledUtterance> corpus;
  std::vector<UtteranceSpectra> spectra;
  SpectraProvider provider;
  JointModel model;

  explicit Fixture(TrainConfig cfg, const TaperBank* bank = nullptr)
      : config(std::move(cfg)),
        corpus(to_labeled(synthesize_corpus(small_spec()))),
        model(config, MfccComputer(config.features)) {
    const TaperBank tapers =
        bank ? *bank : make_swce_bank(config.num_tapers, config.features.framing.frame_length);
    for (const auto& u : corpus) {
      spectra.push_back(compute_utterance_spectra(u, tapers, config.features.framing));
    }
    provider = [this](std::size_t i) -> const UtteranceSpectra& { return spectra.at(i); };
  }

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
};

double loss_at(const Fixture& fx, TrainState state, std::span<const std::size_t> batch,
               std::size_t j, double value) {
  state.lambda[j] = value;
  return fx.model.forward_loss(batch, fx.provider, state).loss;
}

}  // namespace

TEST_CASE("project weights") {
  CHECK(project_weights(std::vector<double>{2.0, 2.0}) == std::vector<double>{0.5, 0.5});
  const auto clipped = project_weights(std::vector<double>{1.0, -1.0});
  CHECK(clipped[1] == doctest::Approx(1e-8 / (1.0 + 1e-8)));
  CHECK(clipped[0] == doctest::Approx(1.0 / (1.0 + 1e-8)));
  CHECK(project_weights(std::vector<double>{-1.0, -3.0}) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(project_weights(std::vector<double>{}), ConfigError);

  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto x = gaussian_vector(1 + seed % 12, seed);
    const auto y = project_weights(x);
    CHECK(project_weights(y) == y);
    CHECK(std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; }));
    CHECK(std::abs(std::accumulate(y.begin(), y.end(), 0.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("projection backward matches finite differences") {
  const std::vector<double> x = {0.3, -0.2, 1.1, 0.05, 0.7};
  const auto g = gaussian_vector(5, 3);
  const auto grad = project_weights_backward(x, g);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (testing::dot(project_weights(up), g) - testing::dot(project_weights(down), g)) / 2e-6;
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(grad[1] == 0.0);
}

TEST_CASE("lambda initialization") {
  TrainConfig cfg;
  cfg.num_tapers = 1;
  CHECK(init_lambda(cfg) == std::vector<double>{1.0});
  cfg.num_tapers = 8;
  CHECK(init_lambda(cfg) == swce_weights(8, 400));
  cfg.init = LambdaInit::kGaussian;
  cfg.seed = 5;
  const auto a = init_lambda(cfg);
  CHECK(a == init_lambda(cfg));
  cfg.seed = 6;
  CHECK(a != init_lambda(cfg));
  CHECK(lambda_init_from_string("gaussian") == LambdaInit::kGaussian);
  CHECK(weight_constraint_from_string("relu") == WeightConstraint::kReluL1);
  CHECK(weight_constraint_from_string("none") == WeightConstraint::kNone);
  CHECK_THROWS_AS(lambda_init_from_string("uniform"), ConfigError);
}

TEST_CASE("concentration statistics") {
  const std::vector<double> uniform(8, 0.125);
  CHECK(top2_mass(uniform) == doctest::Approx(0.25));
  CHECK(weight_entropy(uniform) == doctest::Approx(std::log(8.0)));
  std::vector<double> onehot(8, 0.0);
  onehot[3] = 1.0;
  CHECK(top2_mass(onehot) == 1.0);
  CHECK(weight_entropy(onehot) == 0.0);
  const auto w = swce_weights(8, 400);
  CHECK(top2_mass(w) == doctest::Approx(w[6] + w[7]));
  double h = 0.0;
  for (double v : w) h -= v * std::log(v);
  CHECK(weight_entropy(w) == doctest::Approx(h));
}

TEST_CASE("aam softmax closed form") {
  TrainConfig cfg;
  cfg.margin = 0.0;
  cfg.scale = 1.0;
  cfg.num_tapers = 4;
  Fixture fx(cfg);
  TrainState state = init_state(cfg, 2);
  const std::vector<std::size_t> batch = {0};
  const auto probe = fx.model.forward_loss(batch, fx.provider, state);
  const auto& x = probe.utterances[0].normalized;
  // Utterance 0 has label 0; put prototype 0 on the embedding.
  auto other = gaussian_vector(x.size(), 4);
  const double norm = std::sqrt(testing::dot(other, other));
  for (double& v : other) v /= norm;
  std::copy(x.begin(), x.end(), state.classifier.prototypes.begin());
  std::copy(other.begin(), other.end(), state.classifier.prototypes.begin() + x.size());
  const double loss = fx.model.forward_loss(batch, fx.provider, state).loss;
  const double c = testing::dot(x, other);
  CHECK(loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(c))))
                     .epsilon(1e-6));

  const std::vector<std::size_t> twice = {0, 0, 0};
  CHECK(fx.model.forward_loss(twice, fx.provider, state).loss == doctest::Approx(loss));
}

TEST_CASE("loss is nonnegative and gradients finite") {
  TrainConfig cfg;
  cfg.num_tapers = 8;
  Fixture fx(cfg);
  const TrainState state = init_state(cfg, 3);
  const auto batch = fx.all();
  const auto cache = fx.model.forward_loss(batch, fx.provider, state);
  CHECK(cache.loss >= 0.0);
  const auto g = fx.model.backward(cache, fx.provider, state);
  CHECK(g.lambda.size() == 8);
  CHECK(g.projection.size() == state.classifier.projection.size());
  CHECK(g.prototypes.size() == state.classifier.prototypes.size());
  for (const auto* v : {&g.lambda, &g.projection, &g.prototypes}) {
    CHECK(std::all_of(v->begin(), v->end(), [](double x) { return std::isfinite(x); }));
  }
}

TEST_CASE("lambda gradient matches central differences") {
  for (auto constraint : {WeightConstraint::kNone, WeightConstraint::kReluL1}) {
    TrainConfig cfg;
    cfg.num_tapers = 6;
    cfg.constraint = constraint;
    Fixture fx(cfg);
    const auto batch = fx.all();
    std::size_t checked = 0, good = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      cfg.seed = seed;
      TrainState state = init_state(cfg, 3);
      const auto r = gaussian_vector(6, 100 + seed);
      for (std::size_t j = 0; j < 6; ++j) state.lambda[j] = 0.1 + std::abs(r[j]) * 0.2;
      const auto cache = fx.model.forward_loss(batch, fx.provider, state);
      const auto g = fx.model.backward(cache, fx.provider, state);
      for (std::size_t j = 0; j < 6; ++j) {
        const double h = 1e-6 * std::abs(state.lambda[j]);
        const double fd = (loss_at(fx, state, batch, j, state.lambda[j] + h) -
                           loss_at(fx, state, batch, j, state.lambda[j] - h)) /
                          (2.0 * h);
        ++checked;
        if (std::abs(g.lambda[j] - fd) <= 1e-4 * std::abs(fd) + 1e-6) ++good;
      }
    }
    CHECK(static_cast<double>(good) >= 0.95 * static_cast<double>(checked));
  }
}

TEST_CASE("identical sub-spectra give identical gradients") {
  const auto t = swce_taper(1, 400);
  const TaperBank twin(TaperKind::kCustom, {t, t, swce_taper(2, 400)}, {0.3, 0.3, 0.4});
  TrainConfig cfg;
  cfg.num_tapers = 3;
  Fixture fx(cfg, &twin);
  TrainState state = init_state(cfg, 3);
  state.lambda = {0.3, 0.3, 0.4};
  const auto cache = fx.model.forward_loss(fx.all(), fx.provider, state);
  const auto g = fx.model.backward(cache, fx.provider, state);
  CHECK(g.lambda[0] == g.lambda[1]);
}

TEST_CASE("stale cache is rejected") {
  TrainConfig cfg;
  Fixture fx(cfg);
  TrainState state = init_state(cfg, 3);
  const auto cache = fx.model.forward_loss(fx.all(), fx.provider, state);
  const auto g = fx.model.backward(cache, fx.provider, state);
  adam_step(state, g, 1e-3);
  CHECK_THROWS_AS(fx.model.backward(cache, fx.provider, state), StateError);
}

TEST_CASE("adam step properties") {
  TrainConfig cfg;
  cfg.constraint = WeightConstraint::kNone;
  Fixture fx(cfg);
  TrainState state = init_state(cfg, 3);
  const TrainState before = state;
  Gradients zero{std::vector<double>(state.lambda.size(), 0.0),
                 std::vector<double>(state.classifier.projection.size(), 0.0),
                 std::vector<double>(state.classifier.prototypes.size(), 0.0)};
  adam_step(state, zero, 1e-3);
  CHECK(state.lambda == before.lambda);
  CHECK(state.classifier.projection == before.classifier.projection);
  for (std::size_t i = 0; i < before.classifier.prototypes.size(); ++i) {
    CHECK(state.classifier.prototypes[i] ==
          doctest::Approx(before.classifier.prototypes[i]).epsilon(1e-14));
  }

  state = before;
  Gradients g = zero;
  g.lambda = gaussian_vector(state.lambda.size(), 9);
  adam_step(state, g, 1e-3);
  for (std::size_t j = 0; j < g.lambda.size(); ++j) {
    const double delta = state.lambda[j] - before.lambda[j];
    CHECK(delta == doctest::Approx(-1e-3 * (g.lambda[j] > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }
}

TEST_CASE("small steps descend") {
  TrainConfig cfg;
  Fixture fx(cfg);
  const auto batch = fx.all();
  int increased = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    cfg.init = seed % 2 ? LambdaInit::kGaussian : LambdaInit::kSwce;
    TrainState state = init_state(cfg, 3);
    const auto cache = fx.model.forward_loss(batch, fx.provider, state);
    adam_step(state, fx.model.backward(cache, fx.provider, state), 1e-4);
    if (fx.model.forward_loss(batch, fx.provider, state).loss > cache.loss) ++increased;
  }
  CHECK(increased <= 5);
}

TEST_CASE("training contract") {
  const auto corpus = to_labeled(synthesize_corpus(small_spec()));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;

  SUBCASE("zero learning rate keeps the closed-form weights") {
    cfg.lr = 0.0;
    const auto r = train(corpus, cfg);
    REQUIRE(r.log.epochs.size() == 4);
    for (const auto& rec : r.log.epochs) CHECK(rec.lambda == swce_weights(8, 400));
    CHECK(r.bank.weights() == swce_weights(8, 400));
  }
  SUBCASE("same seed reproduces the log exactly") {
    const auto a = train(corpus, cfg);
    const auto b = train(corpus, cfg);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
      CHECK(a.log.epochs[e].loss == b.log.epochs[e].loss);
      CHECK(a.log.epochs[e].lambda == b.log.epochs[e].lambda);
    }
    CHECK(a.bank == b.bank);
  }
  SUBCASE("initializations differ") {
    const auto a = train(corpus, cfg);
    cfg.init = LambdaInit::kGaussian;
    const auto b = train(corpus, cfg);
    CHECK(a.log.epochs[0].lambda != b.log.epochs[0].lambda);
    CHECK(a.log.epochs.back().loss != b.log.epochs.back().loss);
  }
  SUBCASE("cached and recomputed spectra agree bit for bit") {
    TrainOptions recompute;
    recompute.recompute_spectra = true;
    const auto a = train(corpus, cfg);
    const auto b = train(corpus, cfg, recompute);
    for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
      CHECK(a.log.epochs[e].loss == b.log.epochs[e].loss);
    }
  }
  SUBCASE("constraint holds after every step") {
    cfg.init = LambdaInit::kGaussian;
    TrainOptions opts;
    std::size_t steps = 0;
    opts.on_step = [&](const TrainState& s) {
      ++steps;
      const auto w = s.exported_lambda();
      CHECK(std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0; }));
      CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-9);
      CHECK(s.effective_lambda() == s.lambda);
      const auto& p = s.classifier.prototypes;
      const std::size_t d = s.classifier.embed_dim;
      for (std::size_t c = 0; c < s.classifier.num_classes; ++c) {
        const std::span<const double> row(p.data() + c * d, d);
        CHECK(std::abs(testing::dot(row, row) - 1.0) < 1e-9);
      }
    };
    const auto r = train(corpus, cfg, opts);
    CHECK(steps == r.log.steps);
    CHECK(steps == 9);
  }
  SUBCASE("unconstrained runs export a valid bank") {
    cfg.init = LambdaInit::kGaussian;
    cfg.constraint = WeightConstraint::kNone;
    const auto r = train(corpus, cfg);
    const auto& w = r.bank.weights();
    CHECK(std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0; }));
    CHECK(r.state.effective_lambda() == r.state.lambda);
    CHECK(w == project_weights(r.state.lambda));
  }
  SUBCASE("loss decreases") {
    cfg.epochs = 10;
    const auto r = train(corpus, cfg);
    CHECK(r.log.epochs.back().loss < 0.8 * r.log.epochs.front().loss);
  }
  SUBCASE("divergence is reported") {
    cfg.scale = 1e308;
    CHECK_THROWS_AS(train(corpus, cfg), DivergenceError);
  }
  SUBCASE("corpus requirements") {
    std::vector<LabeledUtterance> one_class(corpus.begin(), corpus.begin() + 3);
    CHECK_THROWS_AS(train(one_class, cfg), ConfigError);
    std::vector<LabeledUtterance> thin = {corpus[0], corpus[1], corpus[3]};
    CHECK_THROWS_AS(train(thin, cfg), ConfigError);
  }
}
