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


#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "taperlab/corpus.hpp"
#include "taperlab/features.hpp"
#include "taperlab/multitaper.hpp"
#include "taperlab/optimizer.hpp"

using namespace taperlab;

namespace {

Frame noise_frame(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist;
  Frame f;
  f.samples.resize(n);
  for (double& x : f.samples) x = dist(rng);
  return f;
}

void BM_HammingSpectrum(benchmark::State& state) {
  const Frame frame = noise_frame(400);
  const Window w = make_window(WindowKind::kHamming, 400);
  for (auto _ : state) benchmark::DoNotOptimize(real_dft_power(frame, w, 512));
}
BENCHMARK(BM_HammingSpectrum);

void BM_MultitaperSpectrum(benchmark::State& state) {
  const Frame frame = noise_frame(400);
  const TaperBank bank = make_swce_bank(static_cast<std::size_t>(state.range(0)), 400);
  for (auto _ : state) benchmark::DoNotOptimize(multitaper_power(frame, bank, 512));
}
BENCHMARK(BM_MultitaperSpectrum)->Arg(2)->Arg(8)->Arg(20);

void BM_Mfcc(benchmark::State& state) {
  const MfccComputer mfcc{FeatureConfig{}};
  std::vector<double> spectrum(257);
  std::iota(spectrum.begin(), spectrum.end(), 1.0);
  MfccTrace trace;
  for (auto _ : state) {
    mfcc.compute(spectrum, trace);
    benchmark::DoNotOptimize(trace.cepstra.data());
  }
}
BENCHMARK(BM_Mfcc);

void BM_ExtractOneSecond(benchmark::State& state) {
  FeatureConfig config;
  config.estimator = std::make_shared<const TaperBank>(make_swce_bank(8, 400));
  const Frame signal = noise_frame(16000);
  for (auto _ : state) benchmark::DoNotOptimize(extract_utterance(signal.samples, config));
}
BENCHMARK(BM_ExtractOneSecond)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const TrainConfig config;
  const auto corpus = to_labeled(synthesize_corpus(ToyCorpusSpec{}));
  const TaperBank tapers = make_swce_bank(config.num_tapers, 400);
  std::vector<UtteranceSpectra> spectra;
  for (const auto& u : corpus) {
    spectra.push_back(compute_utterance_spectra(u, tapers, config.features.framing));
  }
  const SpectraProvider provider = [&](std::size_t i) -> const UtteranceSpectra& {
    return spectra[i];
  };
  const JointModel model(config, MfccComputer(config.features));
  TrainState st = init_state(config, 4);
  std::vector<std::size_t> batch(config.batch_size);
  std::iota(batch.begin(), batch.end(), 0);
  for (auto _ : state) {
    const auto cache = model.forward_loss(batch, provider, st);
    adam_step(st, model.backward(cache, provider, st), config.lr);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
