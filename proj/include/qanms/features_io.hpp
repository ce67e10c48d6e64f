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

// Readers and writers for the on-disk inputs: detection dumps with per-box
// visual features, text queries, GloVe-format word embeddings, region
// annotations, noun lexicons, and trained scorer parameters.
//
// All JSONL readers skip blank lines, keep file order, and report the
// 1-based line number of the first offending record.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qanms/geometry.hpp"
#include "qanms/matrix.hpp"
#include "qanms/params.hpp"

namespace qanms {

inline constexpr std::size_t kDefaultMaxQueryTokens = 20;
inline constexpr const char* kUnknownWord = "unk";

struct Detection {
  Box box;
  std::string label;
  double confidence = 0.0;
  std::vector<double> feature;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;

  friend bool operator==(const ImageDetections&,
                         const ImageDetections&) = default;
};

struct QueryRecord {
  std::string query_id;
  std::string image_id;
  std::vector<std::string> tokens;
  std::optional<Box> referent;
  /// Evaluation split name; "all" when the record carries none.
  std::string split = "all";
  /// Externally tagged nouns. When present they replace lexicon lookup.
  std::optional<std::vector<std::string>> nouns;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct Annotation {
  std::string image_id;
  Box box;
  std::string label;
  /// Optional: restricts the record to one query (phrase-grounding output).
  std::optional<std::string> query_id;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Word -> vector map of a fixed dimension that always holds "unk".
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& word) const {
    return vectors_.contains(word);
  }

  /// Inserts or replaces. Throws DimensionError / SchemaError on wrong size
  /// or non-finite entries.
  void set(const std::string& word, std::vector<double> vec);

  /// Stored vector, or the "unk" vector when absent.
  const std::vector<double>& get(const std::string& word) const;

  /// Words in lexicographic order (for deterministic serialization).
  std::vector<std::string> words() const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Lowercases, strips ASCII punctuation, splits on whitespace and truncates
/// to `max_tokens` (tail dropped).
std::vector<std::string> normalize_tokens(
    const std::vector<std::string>& raw,
    std::size_t max_tokens = kDefaultMaxQueryTokens);
std::vector<std::string> normalize_tokens(
    const std::string& text, std::size_t max_tokens = kDefaultMaxQueryTokens);

// Detections. `expected_dim`, when given, pins the feature dimension;
// otherwise the first record declares it.
std::vector<ImageDetections> read_detections(
    std::istream& in, std::optional<std::size_t> expected_dim = {});
std::vector<ImageDetections> load_detections(
    const std::filesystem::path& path,
    std::optional<std::size_t> expected_dim = {});
void write_detections(std::ostream& out,
                      const std::vector<ImageDetections>& images);

std::vector<QueryRecord> read_queries(
    std::istream& in, std::size_t max_tokens = kDefaultMaxQueryTokens);
std::vector<QueryRecord> load_queries(
    const std::filesystem::path& path,
    std::size_t max_tokens = kDefaultMaxQueryTokens);
void write_queries(std::ostream& out, const std::vector<QueryRecord>& queries);

std::vector<Annotation> read_annotations(std::istream& in);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out,
                       const std::vector<Annotation>& annotations);

/// GloVe text format: a word followed by `dim` floats per line. A zero "unk"
/// vector is added when the file has none.
EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

/// One lowercase noun per line; blank lines and '#' comments ignored.
std::unordered_set<std::string> read_lexicon(std::istream& in);
std::unordered_set<std::string> load_lexicon(const std::filesystem::path& path);

/// |tokens| x dim matrix; row j is the vector for token j or "unk".
Matrix lookup_words(const std::vector<std::string>& tokens,
                    const EmbeddingTable& table);

/// Stacks the detections' visual features into an n x v matrix.
Matrix stack_features(const std::vector<Detection>& detections);

// Parameter files. Layout (all integers and doubles little-endian):
//   8 bytes   magic "QANMSPRM"
//   uint32    format version (1)
//   uint64    visual dimension v
//   uint64    word dimension q
//   uint64    number of doubles that follow
//   float64[] values, tensors in ScorerParams::for_each_tensor order
// Loading rejects bad magic, truncation, trailing bytes and, when given,
// a (v, q) header that disagrees with the expected dimensions.
void write_params(std::ostream& out, const ScorerParams& params);
ScorerParams read_params(std::istream& in,
                         std::optional<std::size_t> expected_visual_dim = {},
                         std::optional<std::size_t> expected_word_dim = {});
void save_params(const std::filesystem::path& path, const ScorerParams& params);
ScorerParams load_params(const std::filesystem::path& path,
                         std::optional<std::size_t> expected_visual_dim = {},
                         std::optional<std::size_t> expected_word_dim = {});

}  // namespace qanms
