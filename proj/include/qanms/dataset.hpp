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

// Joins loaded detections, queries and foreground sets into training
// samples and evaluation queries, and reads/writes foreground files.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qanms/evaluation.hpp"
#include "qanms/features_io.hpp"
#include "qanms/pseudo_gt.hpp"
#include "qanms/training.hpp"

namespace qanms {

enum class GtSource { kTextSimilarity, kPhraseGrounding };

GtSource gt_source_from_string(const std::string& s);

class Dataset {
 public:
  Dataset(std::vector<ImageDetections> images, std::vector<QueryRecord> queries);

  const std::vector<ImageDetections>& images() const { return images_; }
  const std::vector<QueryRecord>& queries() const { return queries_; }

  /// Detections of the query's image; empty when the image has none.
  std::span<const Detection> detections_for(const QueryRecord& q) const;

  /// Feature dimension of the first detection, 0 when there are none.
  std::size_t visual_dim() const;

 private:
  std::vector<ImageDetections> images_;
  std::vector<QueryRecord> queries_;
  std::unordered_map<std::string, std::size_t> image_index_;
};

/// One foreground set per query, in query order.
std::vector<ForegroundSet> build_foregrounds(
    std::span<const QueryRecord> queries, std::span<const Annotation> annotations,
    GtSource source, const std::unordered_set<std::string>& lexicon,
    const EmbeddingTable& table, double gamma = kDefaultSimilarityThreshold);

/// Pre-filtered detections, their word matrix and targets for each query.
std::vector<TrainSample> build_training_samples(
    const Dataset& data, std::span<const ForegroundSet> foregrounds,
    const EmbeddingTable& table, double delta = kDefaultConfidenceThreshold);

std::vector<EvalQuery> build_eval_queries(const Dataset& data,
                                          std::span<const ForegroundSet> foregrounds,
                                          const EmbeddingTable& table);

/// foreground.jsonl, one line per query:
///   {"query_id", "image_id", "referent": box|null,
///    "contextual": [{"box", "label", "source"}],
///    "targets": [{"rho", "label", "q"}]}   (one per pre-filtered detection)
void write_foregrounds(std::ostream& out, std::span<const QueryRecord> queries,
                       std::span<const ForegroundSet> foregrounds,
                       std::span<const std::vector<BoxTarget>> targets);

/// Foreground sets aligned with `queries` (matched by query_id). Throws
/// SchemaError when a query has no record.
std::vector<ForegroundSet> read_foregrounds(std::istream& in,
                                            std::span<const QueryRecord> queries);
std::vector<ForegroundSet> load_foregrounds(const std::filesystem::path& path,
                                            std::span<const QueryRecord> queries);

}  // namespace qanms
