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
#include <span>
#include <vector>

#include "qanms/execution.hpp"
#include "qanms/features_io.hpp"

namespace qanms {

inline constexpr double kDefaultConfidenceThreshold = 0.05;
inline constexpr double kDefaultNmsIou = 0.5;

struct ScoredDetection {
  Detection detection;
  double relatedness = 1.0;
  double fused = 0.0;  ///< relatedness * detection.confidence
  /// Position in the list handed to fuse(); breaks score ties.
  std::size_t index = 0;

  friend bool operator==(const ScoredDetection&, const ScoredDetection&) = default;
};

/// Keeps detections with confidence >= delta, in input order.
std::vector<Detection> prefilter(std::span<const Detection> dets, double delta);

/// Pairs each detection with its relatedness; throws DimensionError on a
/// length mismatch.
std::vector<ScoredDetection> fuse(std::span<const Detection> dets,
                                  std::span<const double> relatedness);

/// Confidence-only scoring (relatedness fixed at 1).
std::vector<ScoredDetection> fuse_baseline(std::span<const Detection> dets);

/// Greedy NMS on the fused score. Repeatedly keeps the best remaining
/// detection (ties: lower index first) and drops every remaining detection
/// whose IoU with it exceeds `iou_threshold`. Class-agnostic unless
/// `per_class` is set. Output is in descending fused-score order.
///
/// The parallel policy splits each suppression sweep across OpenMP threads;
/// the serial policy is the reference. Both return identical lists.
std::vector<ScoredDetection> greedy_nms(std::vector<ScoredDetection> scored,
                                        double iou_threshold = kDefaultNmsIou,
                                        Execution exec = Execution::kParallel,
                                        bool per_class = false);

/// First min(n, kept.size()) entries.
std::vector<ScoredDetection> top_n(std::span<const ScoredDetection> kept,
                                   std::size_t n);

}  // namespace qanms
