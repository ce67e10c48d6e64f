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

#include "qanms/suppression.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qanms/errors.hpp"

namespace qanms {

namespace {

// Below this many candidates a sweep is cheaper than waking the thread team.
constexpr std::ptrdiff_t kParallelSweepMin = 512;

}  // namespace

std::vector<Detection> prefilter(std::span<const Detection> dets, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw ConfigError("confidence threshold must lie in [0, 1]");
  }
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.confidence >= delta) out.push_back(d);
  }
  return out;
}

std::vector<ScoredDetection> fuse(std::span<const Detection> dets,
                                  std::span<const double> relatedness) {
  if (dets.size() != relatedness.size()) {
    throw DimensionError("fuse: " + std::to_string(dets.size()) + " detections but " +
                         std::to_string(relatedness.size()) + " relatedness scores");
  }
  std::vector<ScoredDetection> out;
  out.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    out.push_back({dets[i], relatedness[i], relatedness[i] * dets[i].confidence, i});
  }
  return out;
}

std::vector<ScoredDetection> fuse_baseline(std::span<const Detection> dets) {
  const std::vector<double> ones(dets.size(), 1.0);
  return fuse(dets, ones);
}

std::vector<ScoredDetection> greedy_nms(std::vector<ScoredDetection> scored,
                                        double iou_threshold, Execution exec,
                                        bool per_class) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ConfigError("NMS IoU threshold must lie in (0, 1)");
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) {
                     if (a.fused != b.fused) return a.fused > b.fused;
                     return a.index < b.index;
                   });

  const auto n = static_cast<std::ptrdiff_t>(scored.size());
  std::vector<char> suppressed(scored.size(), 0);
  std::vector<ScoredDetection> kept;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (suppressed[i]) continue;
    const auto& best = scored[i];
    kept.push_back(best);
    const Box anchor = best.detection.box;
    auto sweep = [&](std::ptrdiff_t j) {
      if (suppressed[j]) return;
      if (per_class && scored[j].detection.label != best.detection.label) return;
      if (iou(anchor, scored[j].detection.box) > iou_threshold) suppressed[j] = 1;
    };
    if (exec == Execution::kParallel && n - i > kParallelSweepMin) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t j = i + 1; j < n; ++j) sweep(j);
    } else {
      for (std::ptrdiff_t j = i + 1; j < n; ++j) sweep(j);
    }
  }
  return kept;
}

std::vector<ScoredDetection> top_n(std::span<const ScoredDetection> kept,
                                   std::size_t n) {
  const std::size_t count = std::min(n, kept.size());
  return {kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(count)};
}

}  // namespace qanms
