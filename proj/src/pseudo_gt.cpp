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

#include "qanms/pseudo_gt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "qanms/errors.hpp"

namespace qanms {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kReferent:
      return "referent";
    case Provenance::kTextSimilarity:
      return "text_sim";
    case Provenance::kPhraseGrounding:
      return "wspg_import";
  }
  return "unknown";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "referent") return Provenance::kReferent;
  if (s == "text_sim") return Provenance::kTextSimilarity;
  if (s == "wspg_import") return Provenance::kPhraseGrounding;
  throw SchemaError("unknown provenance '" + std::string(s) + "'");
}

std::vector<Box> ForegroundSet::contextual_boxes() const {
  std::vector<Box> out;
  out.reserve(contextual.size());
  for (const auto& c : contextual) out.push_back(c.box);
  return out;
}

std::vector<Box> ForegroundSet::all_boxes() const {
  std::vector<Box> out;
  if (referent) out.push_back(*referent);
  for (const auto& c : contextual) out.push_back(c.box);
  return out;
}

std::vector<std::string> extract_nouns(const std::vector<std::string>& tokens,
                                       const std::unordered_set<std::string>& lexicon) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (lexicon.contains(t) && std::find(out.begin(), out.end(), t) == out.end()) {
      out.push_back(t);
    }
  }
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    uv += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<double> label_embedding(const std::string& label,
                                    const EmbeddingTable& table) {
  const auto tokens = normalize_tokens(label, SIZE_MAX);
  std::vector<double> mean(table.dim(), 0.0);
  if (tokens.empty()) return mean;
  for (const auto& t : tokens) {
    const auto& vec = table.get(t);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += vec[k];
  }
  for (double& x : mean) x /= static_cast<double>(tokens.size());
  return mean;
}

std::vector<std::size_t> match_contextual_indices(
    const std::vector<std::string>& nouns, std::span<const Annotation> annotations,
    const EmbeddingTable& table, double gamma) {
  if (!(gamma >= -1.0 && gamma <= 1.0)) {
    throw ConfigError("similarity threshold must lie in [-1, 1]");
  }
  std::vector<std::size_t> out;
  if (nouns.empty()) return out;
  std::vector<std::vector<double>> noun_vecs;
  noun_vecs.reserve(nouns.size());
  for (const auto& n : nouns) noun_vecs.push_back(table.get(n));

  for (std::size_t a = 0; a < annotations.size(); ++a) {
    const auto label_vec = label_embedding(annotations[a].label, table);
    const bool hit = std::any_of(noun_vecs.begin(), noun_vecs.end(), [&](const auto& nv) {
      return cosine(nv, label_vec) >= gamma;
    });
    if (hit) out.push_back(a);
  }
  return out;
}

std::vector<Box> match_contextual(const std::vector<std::string>& nouns,
                                  std::span<const Annotation> annotations,
                                  const EmbeddingTable& table, double gamma) {
  std::vector<Box> out;
  for (std::size_t i : match_contextual_indices(nouns, annotations, table, gamma)) {
    out.push_back(annotations[i].box);
  }
  return out;
}

std::vector<Annotation> annotations_for(const QueryRecord& query,
                                        std::span<const Annotation> annotations) {
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    if (a.image_id != query.image_id) continue;
    if (a.query_id && *a.query_id != query.query_id) continue;
    out.push_back(a);
  }
  return out;
}

ForegroundSet text_similarity_foreground(const QueryRecord& query,
                                         std::span<const Annotation> image_annotations,
                                         const std::unordered_set<std::string>& lexicon,
                                         const EmbeddingTable& table, double gamma) {
  ForegroundSet fg;
  fg.referent = query.referent;
  const auto nouns = query.nouns ? *query.nouns : extract_nouns(query.tokens, lexicon);
  for (std::size_t i : match_contextual_indices(nouns, image_annotations, table, gamma)) {
    const auto& a = image_annotations[i];
    // The referent's own region matches its noun; it is already foreground.
    if (fg.referent && a.box == *fg.referent) continue;
    fg.contextual.push_back({a.box, a.label, Provenance::kTextSimilarity});
  }
  return fg;
}

ForegroundSet phrase_grounding_foreground(const QueryRecord& query,
                                          std::span<const Annotation> query_annotations) {
  ForegroundSet fg;
  fg.referent = query.referent;
  for (const auto& a : query_annotations) {
    fg.contextual.push_back({a.box, a.label, Provenance::kPhraseGrounding});
  }
  return fg;
}

int quantize_rho(double rho) {
  double level = std::max(0.0, rho - 0.5) / 0.1;
  // 0.8 - 0.5 is 0.30000000000000004 in binary; snap such round-off back to
  // the bucket edge so the levels match exact decimal arithmetic. Levels
  // below 1 are never snapped, which keeps rho > 0.5 => q >= 1.
  const double nearest = std::nearbyint(level);
  if (nearest >= 1.0 && std::abs(level - nearest) <= 1e-9) level = nearest;
  return std::clamp(static_cast<int>(std::ceil(level)), 0, kMaxQValue);
}

BoxTarget make_target(double rho) {
  return {rho, rho > 0.5 ? 1 : 0, quantize_rho(rho)};
}

std::vector<BoxTarget> assign_targets(std::span<const Detection> dets,
                                      const ForegroundSet& fg) {
  const auto boxes = fg.all_boxes();
  std::vector<BoxTarget> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    double rho = 0.0;
    for (const auto& b : boxes) rho = std::max(rho, iou(d.box, b));
    out.push_back(make_target(rho));
  }
  return out;
}

}  // namespace qanms
