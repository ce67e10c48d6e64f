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

// Synthetic fixtures for tests, benchmarks and demos.
//
// The adversarial dataset places every image's objects on a grid. Each
// query names a referent concept and (optionally) a contextual concept. The
// objects the query mentions get low detector confidence while unrelated
// clutter gets high confidence, so confidence-only NMS ranks them last.
// Box features encode the object's concept; word embeddings encode the
// word's concept, so the mentioned objects are learnable from features.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "qanms/features_io.hpp"
#include "qanms/training.hpp"

namespace qanms {

struct AdversarialConfig {
  std::size_t num_queries = 200;
  std::size_t clutter_per_image = 30;
  std::size_t referent_duplicates = 2;  ///< jittered near-copies of the referent
  bool with_contextual = true;
  std::size_t visual_dim = 16;
  double feature_noise = 0.15;
  double mentioned_conf_lo = 0.10;
  double mentioned_conf_hi = 0.30;
  double clutter_conf_lo = 0.40;
  double clutter_conf_hi = 0.95;
  std::string image_prefix = "img";
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::vector<ImageDetections> images;
  std::vector<QueryRecord> queries;
  std::vector<Annotation> annotations;
  EmbeddingTable embeddings{1};
  std::unordered_set<std::string> lexicon;
};

/// Concept vocabulary used by the generator.
const std::vector<std::string>& synthetic_concepts();

/// Embedding table shared by every adversarial dataset (independent of the
/// seed), so train and test sets built from different seeds agree.
EmbeddingTable synthetic_embeddings();

SyntheticDataset make_adversarial_dataset(const AdversarialConfig& config);

/// Query-independent separable set: positives (rho = 1) carry feature
/// pattern A, negatives (rho in [0, 0.4]) pattern B.
std::vector<TrainSample> make_separable_samples(std::size_t num_samples,
                                                std::size_t boxes_per_sample,
                                                std::size_t visual_dim,
                                                std::size_t word_dim,
                                                std::uint64_t seed);

/// Random detections with features for throughput measurements.
std::vector<Detection> make_random_detections(std::size_t count, std::size_t visual_dim,
                                              std::uint64_t seed);

}  // namespace qanms
