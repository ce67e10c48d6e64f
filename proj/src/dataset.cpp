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

#include "qanms/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "qanms/errors.hpp"
#include "qanms/suppression.hpp"

namespace qanms {

using nlohmann::json;

GtSource gt_source_from_string(const std::string& s) {
  if (s == "text" || s == "text_sim") return GtSource::kTextSimilarity;
  if (s == "wspg") return GtSource::kPhraseGrounding;
  throw ConfigError("unknown pseudo ground-truth source '" + s + "' (text|wspg)");
}

Dataset::Dataset(std::vector<ImageDetections> images, std::vector<QueryRecord> queries)
    : images_(std::move(images)), queries_(std::move(queries)) {
  for (std::size_t i = 0; i < images_.size(); ++i) {
    image_index_.emplace(images_[i].image_id, i);
  }
}

std::span<const Detection> Dataset::detections_for(const QueryRecord& q) const {
  auto it = image_index_.find(q.image_id);
  if (it == image_index_.end()) return {};
  return images_[it->second].detections;
}

std::size_t Dataset::visual_dim() const {
  for (const auto& img : images_) {
    if (!img.detections.empty()) return img.detections.front().feature.size();
  }
  return 0;
}

std::vector<ForegroundSet> build_foregrounds(std::span<const QueryRecord> queries,
                                             std::span<const Annotation> annotations,
                                             GtSource source,
                                             const std::unordered_set<std::string>& lexicon,
                                             const EmbeddingTable& table, double gamma) {
  std::unordered_map<std::string, std::vector<Annotation>> by_image;
  for (const auto& a : annotations) by_image[a.image_id].push_back(a);

  std::vector<ForegroundSet> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    auto it = by_image.find(q.image_id);
    const auto local = it == by_image.end() ? std::vector<Annotation>{}
                                            : annotations_for(q, it->second);
    if (source == GtSource::kPhraseGrounding) {
      out.push_back(phrase_grounding_foreground(q, local));
    } else {
      out.push_back(text_similarity_foreground(q, local, lexicon, table, gamma));
    }
  }
  return out;
}

namespace {

void check_aligned(std::size_t queries, std::size_t foregrounds) {
  if (queries != foregrounds) {
    throw DataError("have " + std::to_string(foregrounds) + " foreground sets for " +
                    std::to_string(queries) + " queries");
  }
}

}  // namespace

std::vector<TrainSample> build_training_samples(const Dataset& data,
                                                std::span<const ForegroundSet> foregrounds,
                                                const EmbeddingTable& table, double delta) {
  check_aligned(data.queries().size(), foregrounds.size());
  std::vector<TrainSample> out;
  out.reserve(foregrounds.size());
  const std::size_t v = data.visual_dim();
  for (std::size_t i = 0; i < foregrounds.size(); ++i) {
    const auto& q = data.queries()[i];
    const auto kept = prefilter(data.detections_for(q), delta);
    TrainSample s;
    s.visual = kept.empty() ? Matrix(0, v) : stack_features(kept);
    s.words = lookup_words(q.tokens, table);
    s.targets = assign_targets(kept, foregrounds[i]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<EvalQuery> build_eval_queries(const Dataset& data,
                                          std::span<const ForegroundSet> foregrounds,
                                          const EmbeddingTable& table) {
  check_aligned(data.queries().size(), foregrounds.size());
  std::vector<EvalQuery> out;
  out.reserve(foregrounds.size());
  for (std::size_t i = 0; i < foregrounds.size(); ++i) {
    const auto& q = data.queries()[i];
    const auto dets = data.detections_for(q);
    EvalQuery e;
    e.query_id = q.query_id;
    e.split = q.split;
    e.detections.assign(dets.begin(), dets.end());
    e.words = lookup_words(q.tokens, table);
    e.referent = q.referent;
    e.contextual = foregrounds[i].contextual_boxes();
    out.push_back(std::move(e));
  }
  return out;
}

void write_foregrounds(std::ostream& out, std::span<const QueryRecord> queries,
                       std::span<const ForegroundSet> foregrounds,
                       std::span<const std::vector<BoxTarget>> targets) {
  check_aligned(queries.size(), foregrounds.size());
  check_aligned(queries.size(), targets.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& fg = foregrounds[i];
    json j;
    j["query_id"] = queries[i].query_id;
    j["image_id"] = queries[i].image_id;
    j["referent"] = fg.referent ? json(fg.referent->to_array()) : json(nullptr);
    json ctx = json::array();
    for (const auto& c : fg.contextual) {
      ctx.push_back({{"box", c.box.to_array()},
                     {"label", c.label},
                     {"source", std::string(to_string(c.provenance))}});
    }
    j["contextual"] = std::move(ctx);
    json tg = json::array();
    for (const auto& t : targets[i]) {
      tg.push_back({{"rho", t.rho}, {"label", t.label}, {"q", t.q_value}});
    }
    j["targets"] = std::move(tg);
    out << j.dump() << '\n';
  }
}

std::vector<ForegroundSet> read_foregrounds(std::istream& in,
                                            std::span<const QueryRecord> queries) {
  std::unordered_map<std::string, ForegroundSet> by_query;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ForegroundSet fg;
      if (!j.at("referent").is_null()) {
        fg.referent = Box::from_array(j.at("referent").get<std::array<double, 4>>());
      }
      for (const auto& c : j.at("contextual")) {
        fg.contextual.push_back({Box::from_array(c.at("box").get<std::array<double, 4>>()),
                                 c.at("label").get<std::string>(),
                                 provenance_from_string(c.at("source").get<std::string>())});
      }
      by_query[j.at("query_id").get<std::string>()] = std::move(fg);
    } catch (const json::exception& e) {
      throw ParseError("foreground line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw SchemaError("foreground line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::vector<ForegroundSet> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    auto it = by_query.find(q.query_id);
    if (it == by_query.end()) {
      throw SchemaError("no foreground record for query '" + q.query_id + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<ForegroundSet> load_foregrounds(const std::filesystem::path& path,
                                            std::span<const QueryRecord> queries) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_foregrounds(in, queries);
}

}  // namespace qanms
