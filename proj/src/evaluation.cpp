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

#include "qanms/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qanms/errors.hpp"
#include "qanms/scorer.hpp"

namespace qanms {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

RelatednessFn scorer_relatedness(const ScorerParams& params, Matrix words,
                                 Execution exec) {
  return [&params, words = std::move(words), exec](std::span<const Detection> filtered) {
    if (filtered.empty()) return std::vector<double>{};
    const Matrix visual =
        stack_features(std::vector<Detection>(filtered.begin(), filtered.end()));
    return relatedness(params, visual, words, exec);
  };
}

std::vector<ScoredDetection> filter_proposals(std::span<const Detection> dets,
                                              const RelatednessFn& fn,
                                              const PipelineConfig& config) {
  const auto kept = prefilter(dets, config.delta);
  std::vector<double> r(kept.size(), 1.0);
  if (fn && !kept.empty()) r = fn(kept);
  if (config.relatedness_scale != 1.0) {
    for (double& x : r) x *= config.relatedness_scale;
  }
  return greedy_nms(fuse(kept, r), config.nms_iou, config.exec, config.per_class);
}

namespace {

bool covered(std::span<const Box> proposals, const Box& target, std::size_t n) {
  const std::size_t limit = std::min(n, proposals.size());
  for (std::size_t k = 0; k < limit; ++k) {
    if (iou(proposals[k], target) > kHitIou) return true;
  }
  return false;
}

}  // namespace

double referent_recall(std::span<const std::vector<Box>> proposals,
                       std::span<const Box> referents, std::size_t n) {
  if (proposals.size() != referents.size()) {
    throw std::invalid_argument("referent_recall: length mismatch");
  }
  if (referents.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < referents.size(); ++i) {
    hits += covered(proposals[i], referents[i], n) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(referents.size());
}

std::optional<double> contextual_recall(std::span<const std::vector<Box>> proposals,
                                        std::span<const std::vector<Box>> contextual,
                                        std::size_t n, Averaging averaging) {
  if (proposals.size() != contextual.size()) {
    throw std::invalid_argument("contextual_recall: length mismatch");
  }
  std::size_t pairs = 0, hits = 0, queries = 0;
  double macro_sum = 0.0;
  for (std::size_t i = 0; i < contextual.size(); ++i) {
    if (contextual[i].empty()) continue;
    std::size_t local = 0;
    for (const auto& box : contextual[i]) local += covered(proposals[i], box, n) ? 1 : 0;
    hits += local;
    pairs += contextual[i].size();
    macro_sum += static_cast<double>(local) / static_cast<double>(contextual[i].size());
    ++queries;
  }
  if (pairs == 0) return std::nullopt;
  if (averaging == Averaging::kMacro) return macro_sum / static_cast<double>(queries);
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

double top1_hit(std::span<const Box> predictions, std::span<const Box> referents) {
  if (predictions.size() != referents.size()) {
    throw std::invalid_argument("top1_hit: one prediction per query required");
  }
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    hits += iou(predictions[i], referents[i]) > kHitIou ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<std::pair<double, double>> pr_at_x(std::span<const double> ious,
                                               std::span<const double> thresholds) {
  std::vector<std::pair<double, double>> out;
  for (double x : thresholds) {
    if (!(x > 0.0 && x < 1.0)) throw ConfigError("Pr@X threshold must lie in (0, 1)");
    std::size_t hits = 0;
    for (double v : ious) hits += v > x ? 1 : 0;
    out.emplace_back(x, ious.empty() ? 0.0
                                     : static_cast<double>(hits) /
                                           static_cast<double>(ious.size()));
  }
  return out;
}

// ---------------------------------------------------------------- compare

MethodSpec baseline_method() {
  return {"baseline", [](const EvalQuery&) { return RelatednessFn{}; }};
}

MethodSpec scorer_method(const ScorerParams& params, std::string name) {
  return {std::move(name), [&params](const EvalQuery& q) {
            // Queries already fan out across threads; score boxes serially.
            return scorer_relatedness(params, q.words, Execution::kSerial);
          }};
}

std::vector<RecallRow> RecallReport::rows_for(const std::string& method) const {
  std::vector<RecallRow> out;
  for (const auto& r : rows) {
    if (r.method == method) out.push_back(r);
  }
  return out;
}

std::optional<RecallRow> RecallReport::find(const std::string& method,
                                            const std::string& split,
                                            std::size_t budget) const {
  for (const auto& r : rows) {
    if (r.method == method && r.split == split && r.budget == budget) return r;
  }
  return std::nullopt;
}

RecallReport compare(std::span<const EvalQuery> queries,
                     std::span<const MethodSpec> methods,
                     const CompareOptions& options) {
  RecallReport report;
  std::ostringstream budgets;
  for (std::size_t i = 0; i < options.budgets.size(); ++i) {
    budgets << (i ? " " : "") << options.budgets[i];
  }
  report.settings = {
      {"delta", format_double(options.pipeline.delta)},
      {"nms_iou", format_double(options.pipeline.nms_iou)},
      {"nms_mode", options.pipeline.per_class ? "per_class" : "class_agnostic"},
      {"contextual_averaging", options.averaging == Averaging::kMicro ? "micro" : "macro"},
      {"budgets", budgets.str()},
      {"queries", std::to_string(queries.size())},
  };

  std::vector<std::string> splits;
  for (const auto& q : queries) {
    if (std::find(splits.begin(), splits.end(), q.split) == splits.end()) {
      splits.push_back(q.split);
    }
  }
  const bool add_all = splits.size() > 1;
  if (add_all) splits.push_back("all");

  PipelineConfig pipeline = options.pipeline;
  pipeline.exec = Execution::kSerial;

  for (const auto& method : methods) {
    std::vector<std::vector<Box>> ranked(queries.size());
    std::vector<std::string> errors(queries.size());
    const auto nq = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < nq; ++i) {
      try {
        const auto& q = queries[i];
        const auto kept = filter_proposals(q.detections, method.make(q), pipeline);
        ranked[i].reserve(kept.size());
        for (const auto& k : kept) ranked[i].push_back(k.detection.box);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i].empty()) {
        throw DataError("query " + queries[i].query_id + ": " + errors[i]);
      }
    }

    for (const auto& split : splits) {
      std::vector<std::vector<Box>> ref_props, ctx_props, ctx_boxes;
      std::vector<Box> referents;
      for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        if (split != "all" || !add_all) {
          if (q.split != split) continue;
        }
        if (q.referent) {
          ref_props.push_back(ranked[i]);
          referents.push_back(*q.referent);
        }
        ctx_props.push_back(ranked[i]);
        ctx_boxes.push_back(q.contextual);
      }
      std::size_t ctx_targets = 0;
      for (const auto& c : ctx_boxes) {
        if (options.averaging == Averaging::kMicro) {
          ctx_targets += c.size();
        } else {
          ctx_targets += c.empty() ? 0 : 1;
        }
      }
      for (std::size_t n : options.budgets) {
        RecallRow row;
        row.method = method.name;
        row.split = split;
        row.budget = n;
        if (!referents.empty()) row.referent_recall = referent_recall(ref_props, referents, n);
        row.contextual_recall = contextual_recall(ctx_props, ctx_boxes, n, options.averaging);
        row.referent_queries = referents.size();
        row.contextual_targets = ctx_targets;
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

void write_report_csv(std::ostream& out, const RecallReport& report) {
  for (const auto& [key, value] : report.settings) out << "# " << key << '=' << value << '\n';
  out << "method,split,N,referent_recall,contextual_recall\n";
  auto opt = [](const std::optional<double>& x) {
    return x ? format_double(*x) : std::string("nan");
  };
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.split << ',' << r.budget << ',' << opt(r.referent_recall)
        << ',' << opt(r.contextual_recall) << '\n';
  }
}

void write_recall_svg(std::ostream& out, const RecallReport& report,
                      const std::string& split) {
  constexpr double kWidth = 640, kHeight = 400, kMargin = 50;
  std::vector<std::size_t> budgets;
  std::map<std::string, std::vector<const RecallRow*>> by_method;
  std::vector<std::string> method_order;
  for (const auto& r : report.rows) {
    if (r.split != split) continue;
    if (!by_method.contains(r.method)) method_order.push_back(r.method);
    by_method[r.method].push_back(&r);
    if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) {
      budgets.push_back(r.budget);
    }
  }
  std::sort(budgets.begin(), budgets.end());
  const double max_budget = budgets.empty() ? 1.0 : static_cast<double>(budgets.back());
  auto px = [&](std::size_t n) {
    return kMargin + (kWidth - 2 * kMargin) * (max_budget > 0 ? n / max_budget : 0.0);
  };
  auto py = [&](double recall) { return kHeight - kMargin - (kHeight - 2 * kMargin) * recall; };

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">proposal budget N</text>\n";
  out << "<text x=\"15\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 15 "
      << kHeight / 2 << ")\" text-anchor=\"middle\">recall</text>\n";
  for (std::size_t n : budgets) {
    out << "<text x=\"" << px(n) << "\" y=\"" << kHeight - kMargin + 15
        << "\" font-size=\"10\" text-anchor=\"middle\">" << n << "</text>\n";
  }
  std::size_t color = 0;
  double legend_y = kMargin;
  for (const auto& method : method_order) {
    for (int kind = 0; kind < 2; ++kind) {
      std::ostringstream points;
      for (const RecallRow* r : by_method[method]) {
        const auto& v = kind == 0 ? r->referent_recall : r->contextual_recall;
        if (v) points << px(r->budget) << ',' << py(*v) << ' ';
      }
      if (points.str().empty()) continue;
      const char* c = kColors[color++ % std::size(kColors)];
      out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\""
          << (kind == 1 ? " stroke-dasharray=\"6 3\"" : "") << " points=\"" << points.str()
          << "\"/>\n";
      out << "<text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << legend_y << "\" fill=\"" << c
          << "\" font-size=\"12\">" << method << (kind == 0 ? " referent" : " contextual")
          << "</text>\n";
      legend_y += 15;
    }
  }
  out << "</svg>\n";
}

}  // namespace qanms
