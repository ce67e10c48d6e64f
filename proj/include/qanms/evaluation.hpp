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

// Proposal filtering pipeline (pre-filter, score fusion, NMS) and the
// metrics used to compare query-aware against confidence-only filtering:
// recall of referent / contextual objects under a proposal budget, top-1
// hit rate and Pr@X.

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qanms/execution.hpp"
#include "qanms/features_io.hpp"
#include "qanms/params.hpp"
#include "qanms/suppression.hpp"

namespace qanms {

inline constexpr double kHitIou = 0.5;
inline constexpr std::size_t kDefaultRealBudget = 10;

/// Relatedness for the pre-filtered detections of one query, in order.
using RelatednessFn =
    std::function<std::vector<double>(std::span<const Detection> filtered)>;

struct PipelineConfig {
  double delta = kDefaultConfidenceThreshold;
  double nms_iou = kDefaultNmsIou;
  bool per_class = false;
  /// Debug: multiplies every relatedness score before fusion.
  double relatedness_scale = 1.0;
  Execution exec = Execution::kParallel;
};

/// Relatedness from a trained scorer for a fixed query.
RelatednessFn scorer_relatedness(const ScorerParams& params, Matrix words,
                                 Execution exec = Execution::kParallel);

/// prefilter -> fuse -> greedy NMS. An empty `fn` runs the confidence-only
/// baseline (relatedness 1).
std::vector<ScoredDetection> filter_proposals(std::span<const Detection> dets,
                                              const RelatednessFn& fn,
                                              const PipelineConfig& config);

/// Fraction of queries where one of the first N proposals has IoU > 0.5 with
/// the referent. 0 for an empty query list.
double referent_recall(std::span<const std::vector<Box>> proposals,
                       std::span<const Box> referents, std::size_t n);

enum class Averaging { kMicro, kMacro };

/// Micro: over all (query, contextual box) pairs. Macro: per-query coverage
/// averaged over queries with a non-empty set. nullopt when there is nothing
/// to average.
std::optional<double> contextual_recall(
    std::span<const std::vector<Box>> proposals,
    std::span<const std::vector<Box>> contextual, std::size_t n,
    Averaging averaging = Averaging::kMicro);

/// Fraction of predictions with IoU > 0.5 against their referent.
double top1_hit(std::span<const Box> predictions, std::span<const Box> referents);

/// For each threshold X, the fraction of samples whose IoU exceeds X.
std::vector<std::pair<double, double>> pr_at_x(std::span<const double> ious,
                                               std::span<const double> thresholds);

struct EvalQuery {
  std::string query_id;
  std::string split = "all";
  std::vector<Detection> detections;
  Matrix words;
  std::optional<Box> referent;
  std::vector<Box> contextual;
};

/// `make` builds the relatedness function of a method for one query; an
/// empty function means confidence-only ranking.
struct MethodSpec {
  std::string name;
  std::function<RelatednessFn(const EvalQuery&)> make;
};

MethodSpec baseline_method();
MethodSpec scorer_method(const ScorerParams& params, std::string name = "scorer");

struct RecallRow {
  std::string method;
  std::string split;
  std::size_t budget = 0;
  std::optional<double> referent_recall;
  std::optional<double> contextual_recall;
  std::size_t referent_queries = 0;
  std::size_t contextual_targets = 0;  ///< pairs (micro) or queries (macro)

  friend bool operator==(const RecallRow&, const RecallRow&) = default;
};

struct RecallReport {
  /// Settings echoed into the report header.
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<RecallRow> rows;

  std::vector<RecallRow> rows_for(const std::string& method) const;
  std::optional<RecallRow> find(const std::string& method, const std::string& split,
                                std::size_t budget) const;
};

struct CompareOptions {
  PipelineConfig pipeline;
  std::vector<std::size_t> budgets = {kDefaultRealBudget, 100};
  Averaging averaging = Averaging::kMicro;
};

/// Ranks every query's proposals under each method and reports recall per
/// method, split and budget. Queries run in parallel; aggregation follows
/// input order. Splits are reported in first-appearance order, followed by
/// "all" when there is more than one.
RecallReport compare(std::span<const EvalQuery> queries,
                     std::span<const MethodSpec> methods,
                     const CompareOptions& options);

/// method,split,N,referent_recall,contextual_recall with '#' header lines
/// carrying the settings. Undefined metrics are written as "nan".
void write_report_csv(std::ostream& out, const RecallReport& report);

/// Recall-vs-budget curves (one polyline per method and object kind).
void write_recall_svg(std::ostream& out, const RecallReport& report,
                      const std::string& split);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace qanms
