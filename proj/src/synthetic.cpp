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

#include "qanms/synthetic.hpp"

#include <algorithm>
#include <numeric>

#include "qanms/errors.hpp"
#include "qanms/rng.hpp"

namespace qanms {

namespace {

constexpr double kImageSize = 1000.0;
constexpr std::size_t kGrid = 6;
constexpr double kNounMarker = 0.3;

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"the",  "small", "big",  "red",
                                                 "near", "on",    "left", "right"};
  return words;
}

std::size_t concept_dims() { return synthetic_concepts().size(); }

Box cell_box(std::size_t cell, Rng& rng) {
  const double size = kImageSize / kGrid;
  const double cx = static_cast<double>(cell % kGrid) * size;
  const double cy = static_cast<double>(cell / kGrid) * size;
  const double x1 = cx + rng.uniform(5.0, 20.0);
  const double y1 = cy + rng.uniform(5.0, 20.0);
  return Box(x1, y1, x1 + rng.uniform(100.0, 140.0), y1 + rng.uniform(100.0, 140.0));
}

Box jitter(const Box& b, Rng& rng) {
  const double x1 = b.x1() + rng.uniform(-8.0, 8.0);
  const double y1 = b.y1() + rng.uniform(-8.0, 8.0);
  const double x2 = std::max(x1 + 1.0, b.x2() + rng.uniform(-8.0, 8.0));
  const double y2 = std::max(y1 + 1.0, b.y2() + rng.uniform(-8.0, 8.0));
  return Box(x1, y1, x2, y2);
}

std::vector<double> concept_feature(std::size_t concept_id, std::size_t dim, double noise,
                                    Rng& rng) {
  std::vector<double> f(dim);
  for (auto& x : f) x = noise * rng.normal();
  if (concept_id < dim) f[concept_id] += 1.0;
  return f;
}

}  // namespace

const std::vector<std::string>& synthetic_concepts() {
  static const std::vector<std::string> concepts = {"cat", "dog",  "car",   "cup",
                                                    "book", "chair", "bird", "clock"};
  return concepts;
}

EmbeddingTable synthetic_embeddings() {
  const std::size_t nc = concept_dims();
  const std::size_t filler_dims = 3;
  const std::size_t dim = nc + 1 + filler_dims;
  EmbeddingTable table(dim);
  for (std::size_t k = 0; k < nc; ++k) {
    std::vector<double> v(dim, 0.0);
    v[k] = 1.0;
    v[nc] = kNounMarker;
    table.set(synthetic_concepts()[k], std::move(v));
  }
  Rng rng(0xf111e7ULL);
  for (const auto& w : filler_words()) {
    std::vector<double> v(dim, 0.0);
    for (std::size_t k = nc + 1; k < dim; ++k) v[k] = rng.uniform(-0.6, 0.6);
    table.set(w, std::move(v));
  }
  return table;
}

SyntheticDataset make_adversarial_dataset(const AdversarialConfig& config) {
  const std::size_t nc = concept_dims();
  if (config.visual_dim < nc) {
    throw ConfigError("synthetic visual dimension must be at least " + std::to_string(nc));
  }
  if (config.clutter_per_image + 2 > kGrid * kGrid) {
    throw ConfigError("too much clutter for the synthetic grid");
  }
  SyntheticDataset ds;
  ds.embeddings = synthetic_embeddings();
  ds.lexicon.insert(synthetic_concepts().begin(), synthetic_concepts().end());
  Rng rng(config.seed);
  const auto& concepts = synthetic_concepts();
  const auto& fillers = filler_words();

  for (std::size_t qi = 0; qi < config.num_queries; ++qi) {
    const std::string image_id = config.image_prefix + std::to_string(qi);
    const std::size_t ref_concept = rng.index(nc);
    std::size_t ctx_concept = rng.index(nc - 1);
    if (ctx_concept >= ref_concept) ++ctx_concept;

    std::vector<std::size_t> cells(kGrid * kGrid);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    rng.shuffle(cells);

    ImageDetections img{image_id, {}};
    auto add = [&](const Box& box, std::size_t concept_id, double conf) {
      img.detections.push_back({box, concepts[concept_id], conf,
                                concept_feature(concept_id, config.visual_dim,
                                                config.feature_noise, rng)});
    };
    auto mentioned_conf = [&] {
      return rng.uniform(config.mentioned_conf_lo, config.mentioned_conf_hi);
    };

    const Box referent = cell_box(cells[0], rng);
    add(referent, ref_concept, mentioned_conf());
    for (std::size_t d = 0; d < config.referent_duplicates; ++d) {
      add(jitter(referent, rng), ref_concept, 0.9 * mentioned_conf());
    }
    ds.annotations.push_back({image_id, referent, concepts[ref_concept], std::nullopt});

    if (config.with_contextual) {
      const Box ctx = cell_box(cells[1], rng);
      add(ctx, ctx_concept, mentioned_conf());
      ds.annotations.push_back({image_id, ctx, concepts[ctx_concept], std::nullopt});
    }
    for (std::size_t c = 0; c < config.clutter_per_image; ++c) {
      std::size_t clutter_concept = rng.index(nc);
      while (clutter_concept == ref_concept ||
             (config.with_contextual && clutter_concept == ctx_concept)) {
        clutter_concept = rng.index(nc);
      }
      const Box box = cell_box(cells[2 + c], rng);
      add(box, clutter_concept,
          rng.uniform(config.clutter_conf_lo, config.clutter_conf_hi));
      ds.annotations.push_back({image_id, box, concepts[clutter_concept], std::nullopt});
    }
    rng.shuffle(img.detections);
    ds.images.push_back(std::move(img));

    QueryRecord q;
    q.query_id = "q" + std::to_string(qi);
    q.image_id = image_id;
    q.referent = referent;
    q.tokens = {fillers[rng.index(fillers.size())], concepts[ref_concept]};
    if (config.with_contextual) {
      q.tokens.insert(q.tokens.end(), {"near", "the", concepts[ctx_concept]});
    } else {
      q.tokens.insert(q.tokens.end(), {"on", "the", fillers[rng.index(fillers.size())]});
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

std::vector<TrainSample> make_separable_samples(std::size_t num_samples,
                                                std::size_t boxes_per_sample,
                                                std::size_t visual_dim,
                                                std::size_t word_dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> pattern(visual_dim);
  for (std::size_t k = 0; k < visual_dim; ++k) pattern[k] = (k % 2 == 0) ? 1.0 : -1.0;

  std::vector<TrainSample> out;
  for (std::size_t s = 0; s < num_samples; ++s) {
    TrainSample t;
    t.visual = Matrix(boxes_per_sample, visual_dim);
    t.words = Matrix(3, word_dim);
    for (double& x : t.words.values()) x = rng.normal();
    for (std::size_t b = 0; b < boxes_per_sample; ++b) {
      const bool positive = b % 4 == 0;
      const double sign = positive ? 1.0 : -1.0;
      for (std::size_t k = 0; k < visual_dim; ++k) {
        t.visual(b, k) = sign * pattern[k] + 0.1 * rng.normal();
      }
      t.targets.push_back(make_target(positive ? 1.0 : rng.uniform(0.0, 0.4)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Detection> make_random_detections(std::size_t count, std::size_t visual_dim,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Detection> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x1 = rng.uniform(0.0, 900.0);
    const double y1 = rng.uniform(0.0, 900.0);
    Detection d;
    d.box = Box(x1, y1, x1 + rng.uniform(10.0, 100.0), y1 + rng.uniform(10.0, 100.0));
    d.label = "object";
    d.confidence = rng.uniform(0.05, 1.0);
    d.feature.resize(visual_dim);
    for (double& x : d.feature) x = rng.normal();
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace qanms
