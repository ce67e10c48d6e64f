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

// Foreground sets (referent plus contextual objects) and per-box training
// targets derived from them.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "qanms/features_io.hpp"
#include "qanms/geometry.hpp"

namespace qanms {

inline constexpr double kDefaultSimilarityThreshold = 0.4;
inline constexpr int kMaxQValue = 5;

enum class Provenance { kReferent, kTextSimilarity, kPhraseGrounding };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct ForegroundBox {
  Box box;
  std::string label;
  Provenance provenance = Provenance::kTextSimilarity;

  friend bool operator==(const ForegroundBox&, const ForegroundBox&) = default;
};

struct ForegroundSet {
  std::optional<Box> referent;
  std::vector<ForegroundBox> contextual;

  std::vector<Box> contextual_boxes() const;
  /// Referent (if any) followed by the contextual boxes.
  std::vector<Box> all_boxes() const;

  friend bool operator==(const ForegroundSet&, const ForegroundSet&) = default;
};

struct BoxTarget {
  double rho = 0.0;  ///< max IoU against the foreground
  int label = 0;     ///< 1 iff rho > 0.5
  int q_value = 0;   ///< ceil(max(0, rho - 0.5) / 0.1), in [0, 5]

  friend bool operator==(const BoxTarget&, const BoxTarget&) = default;
};

/// Tokens found in the lexicon, first occurrence order, deduplicated.
std::vector<std::string> extract_nouns(
    const std::vector<std::string>& tokens,
    const std::unordered_set<std::string>& lexicon);

/// u.v / (|u||v|); 0 when either norm is 0. Throws std::invalid_argument on
/// a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

/// Mean of the token embeddings of a (possibly multiword) label.
std::vector<double> label_embedding(const std::string& label,
                                    const EmbeddingTable& table);

/// Indices of annotations whose label embedding has cosine >= gamma with at
/// least one noun.
std::vector<std::size_t> match_contextual_indices(
    const std::vector<std::string>& nouns,
    std::span<const Annotation> annotations, const EmbeddingTable& table,
    double gamma = kDefaultSimilarityThreshold);

std::vector<Box> match_contextual(const std::vector<std::string>& nouns,
                                  std::span<const Annotation> annotations,
                                  const EmbeddingTable& table,
                                  double gamma = kDefaultSimilarityThreshold);

/// Annotations that belong to a query: same image and, when the record names
/// a query, that query.
std::vector<Annotation> annotations_for(const QueryRecord& query,
                                        std::span<const Annotation> annotations);

/// Text-similarity foreground: nouns (pre-tagged or via the lexicon) matched
/// against the query's image annotations. An annotation whose box equals the
/// referent box is not repeated as a contextual box.
ForegroundSet text_similarity_foreground(
    const QueryRecord& query, std::span<const Annotation> image_annotations,
    const std::unordered_set<std::string>& lexicon,
    const EmbeddingTable& table, double gamma = kDefaultSimilarityThreshold);

/// Imported phrase-grounding output: every annotation becomes a contextual
/// box verbatim.
ForegroundSet phrase_grounding_foreground(
    const QueryRecord& query, std::span<const Annotation> query_annotations);

int quantize_rho(double rho);
BoxTarget make_target(double rho);

std::vector<BoxTarget> assign_targets(std::span<const Detection> dets,
                                      const ForegroundSet& fg);

}  // namespace qanms
