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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qanms/matrix.hpp"
#include "qanms/params.hpp"
#include "qanms/pseudo_gt.hpp"

namespace qanms {

inline constexpr double kProbabilityClamp = 1e-7;

enum class LossKind { kBinaryXe, kRanking };

std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view s);

/// A (negative, positive) pair of box indices with q[neg] < q[pos] and
/// rho[pos] > 0.5.
struct RankPair {
  std::size_t neg = 0;
  std::size_t pos = 0;

  friend bool operator==(const RankPair&, const RankPair&) = default;
};

/// Mean binary cross-entropy with r clamped to [1e-7, 1 - 1e-7]. Throws
/// std::invalid_argument on empty or mismatched input.
double binary_xe(std::span<const double> r, std::span<const int> labels);
/// dL/dr of binary_xe; zero where the clamp is active.
std::vector<double> binary_xe_grad(std::span<const double> r,
                                   std::span<const int> labels);

/// (1/N) sum max(0, r[neg] - r[pos] + alpha); 0 for an empty pair list.
double ranking_loss(std::span<const RankPair> pairs, std::span<const double> r,
                    double alpha);
std::vector<double> ranking_loss_grad(std::span<const RankPair> pairs,
                                      std::span<const double> r, double alpha);

/// Sampling after splitting: for every positive (rho > 0.5), the boxes with a
/// strictly smaller q-value are ranked by predicted relatedness (descending;
/// ties ordered by a permutation drawn from `seed`) and the first `top_h`
/// become its negatives. Pairs are emitted positive by positive in index
/// order.
std::vector<RankPair> sample_pairs(std::span<const BoxTarget> targets,
                                   std::span<const double> r, std::size_t top_h,
                                   std::uint64_t seed);

struct TrainSample {
  Matrix visual;  ///< |B| x v
  Matrix words;   ///< |Q| x q
  std::vector<BoxTarget> targets;
};

struct TrainConfig {
  LossKind loss = LossKind::kBinaryXe;
  double alpha = 0.1;
  std::size_t top_h = 10;
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  /// Leaves score_fc untouched by the optimizer (its gradients are still
  /// computed).
  bool freeze_score_fc = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct TrainResult {
  ScorerParams params;
  std::vector<double> epoch_loss;
};

/// Adam with bias correction. Tensors whose name is masked are not updated.
class Adam {
 public:
  Adam(const ScorerParams& shape, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  void step(ScorerParams& params, const ScorerParams& grad,
            bool freeze_score_fc = false);

  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ScorerParams m_, v_;
};

/// Loss of one sample and its gradient with respect to every parameter.
/// `pairs` is used for the ranking loss only.
struct SampleGradient {
  double loss = 0.0;
  bool contributes = true;  ///< false for a ranking sample without pairs
  ScorerParams grad;
};
SampleGradient sample_gradient(const ScorerParams& params,
                               const TrainSample& sample, LossKind loss,
                               double alpha, std::span<const RankPair> pairs);

/// Loss only (no backward pass).
double sample_loss(const ScorerParams& params, const TrainSample& sample,
                   LossKind loss, double alpha, std::span<const RankPair> pairs);

/// Mini-batch Adam training. Samples are shuffled every epoch with the
/// seeded generator; for the ranking loss the pairs are re-sampled with the
/// current model at the start of every epoch. Batch gradients are averaged
/// over contributing samples and reduced in a fixed order, so results are
/// bit-identical across runs and thread counts.
///
/// Throws NumericalError naming the epoch and batch of a non-finite loss.
TrainResult train(std::span<const TrainSample> samples,
                  const TrainConfig& config,
                  std::optional<ScorerParams> init = std::nullopt);

}  // namespace qanms
