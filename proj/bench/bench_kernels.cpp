// Copyright 2026 The qanms Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "qanms/evaluation.hpp"
#include "qanms/features_io.hpp"
#include "qanms/rng.hpp"
#include "qanms/scorer.hpp"
#include "qanms/suppression.hpp"
#include "qanms/synthetic.hpp"
#include "qanms/training.hpp"

namespace qanms {
namespace {

Matrix random_words(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.normal();
  return m;
}

Execution mode(const benchmark::State& state) {
  return state.range(1) ? Execution::kParallel : Execution::kSerial;
}

void BM_Forward(benchmark::State& state) {
  const auto boxes = static_cast<std::size_t>(state.range(0));
  const auto params = ScorerParams::initialize(64, 32, 0);
  const Matrix V = stack_features(make_random_detections(boxes, 64, 1));
  const Matrix W = random_words(10, 32, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(relatedness(params, V, W, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->ArgsProduct({{300, 3000}, {0, 1}})->ArgNames({"boxes", "parallel"});

void BM_Nms(benchmark::State& state) {
  const auto boxes = static_cast<std::size_t>(state.range(0));
  const auto dets = make_random_detections(boxes, 1, 3);
  const auto scored = fuse_baseline(dets);
  for (auto _ : state) {
    benchmark::DoNotOptimize(greedy_nms(scored, kDefaultNmsIou, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->ArgsProduct({{300, 3000}, {0, 1}})->ArgNames({"boxes", "parallel"});

void BM_ScoreAndSuppress(benchmark::State& state) {
  const auto params = ScorerParams::initialize(64, 32, 0);
  const auto dets = make_random_detections(300, 64, 1);
  const Matrix V = stack_features(dets);
  const Matrix W = random_words(10, 32, 2);
  for (auto _ : state) {
    const auto r = relatedness(params, V, W, mode(state));
    benchmark::DoNotOptimize(greedy_nms(fuse(dets, r), kDefaultNmsIou, mode(state)));
  }
}
BENCHMARK(BM_ScoreAndSuppress)->ArgsProduct({{300}, {0, 1}})->ArgNames({"boxes", "parallel"});

void BM_TrainEpoch(benchmark::State& state) {
  const auto samples = make_separable_samples(32, 24, 16, 8, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(samples, cfg));
  }
}
BENCHMARK(BM_TrainEpoch);

}  // namespace
}  // namespace qanms

BENCHMARK_MAIN();
