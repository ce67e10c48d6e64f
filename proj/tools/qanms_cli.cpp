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

// qanms: query-aware proposal filtering.
//
//   qanms synth   --out-dir DIR                  synthetic demo dataset
//   qanms gen-gt  --queries ... --out fg.jsonl   foreground sets + targets
//   qanms train   ... --out params.bin           fit the relatedness scorer
//   qanms filter  ... --out filtered.jsonl       fused-score NMS per query
//   qanms eval    ... --out report.csv           baseline vs query-aware recall
//   qanms bench                                  scoring + NMS throughput
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// abort, 1 benchmark threshold exceeded.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qanms/dataset.hpp"
#include "qanms/errors.hpp"
#include "qanms/evaluation.hpp"
#include "qanms/features_io.hpp"
#include "qanms/pseudo_gt.hpp"
#include "qanms/rng.hpp"
#include "qanms/scorer.hpp"
#include "qanms/suppression.hpp"
#include "qanms/synthetic.hpp"
#include "qanms/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qanms;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSlow = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Paths {
  std::string detections, queries, embeddings, annotations, lexicon, foreground, params;
  std::string out;
};

struct Common {
  Paths paths;
  double delta = kDefaultConfidenceThreshold;
  double gamma = kDefaultSimilarityThreshold;
  double nms_iou = kDefaultNmsIou;
  bool per_class = false;
  std::size_t max_tokens = kDefaultMaxQueryTokens;
  int threads = 0;
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw ConfigError(std::string(flag) + ": no such file " + path);
}

void check_ranges(const Common& c) {
  if (!(c.delta >= 0.0 && c.delta <= 1.0)) throw ConfigError("--delta must lie in [0, 1]");
  if (!(c.gamma >= -1.0 && c.gamma <= 1.0)) throw ConfigError("--gamma must lie in [-1, 1]");
  if (!(c.nms_iou > 0.0 && c.nms_iou < 1.0)) throw ConfigError("--nms-iou must lie in (0, 1)");
  if (c.max_tokens == 0) throw ConfigError("--max-tokens must be positive");
}

std::ofstream open_output(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void add_data_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--detections", c.paths.detections, "detections.jsonl");
  cmd->add_option("--queries", c.paths.queries, "queries.jsonl");
  cmd->add_option("--embeddings", c.paths.embeddings, "GloVe-format embeddings.txt");
  cmd->add_option("--max-tokens", c.max_tokens, "query length cap")
      ->default_val(kDefaultMaxQueryTokens);
  cmd->add_option("--threads", c.threads, "OpenMP threads (0 = runtime default)");
}

void add_pipeline_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--delta", c.delta, "detector confidence pre-filter")
      ->default_val(kDefaultConfidenceThreshold);
  cmd->add_option("--nms-iou", c.nms_iou, "NMS IoU threshold")->default_val(kDefaultNmsIou);
  cmd->add_flag("--per-class", c.per_class, "suppress only within a class label");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  AdversarialConfig config;
};

int run_synth(const SynthArgs& a) {
  if (a.out_dir.empty()) throw ConfigError("--out-dir is required");
  fs::create_directories(a.out_dir);
  const auto ds = make_adversarial_dataset(a.config);
  const fs::path dir(a.out_dir);
  {
    std::ofstream out(dir / "detections.jsonl");
    write_detections(out, ds.images);
  }
  {
    std::ofstream out(dir / "queries.jsonl");
    write_queries(out, ds.queries);
  }
  {
    std::ofstream out(dir / "annotations.jsonl");
    write_annotations(out, ds.annotations);
  }
  {
    std::ofstream out(dir / "embeddings.txt");
    write_embeddings(out, ds.embeddings);
  }
  {
    std::ofstream out(dir / "noun_lexicon.txt");
    for (const auto& w : synthetic_concepts()) out << w << '\n';
  }
  std::cout << "wrote " << ds.queries.size() << " queries to " << a.out_dir << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- gen-gt

struct GenGtArgs {
  Common common;
  std::string source = "text";
};

int run_gen_gt(const GenGtArgs& a) {
  const auto& p = a.common.paths;
  check_ranges(a.common);
  const GtSource source = gt_source_from_string(a.source);
  require_file(p.queries, "--queries");
  require_file(p.annotations, "--annotations");
  const auto queries = load_queries(p.queries, a.common.max_tokens);
  const auto annotations = load_annotations(p.annotations);

  std::unordered_set<std::string> lexicon;
  EmbeddingTable table(1);
  if (source == GtSource::kTextSimilarity) {
    require_file(p.embeddings, "--embeddings");
    require_file(p.lexicon, "--lexicon");
    table = load_embeddings(p.embeddings);
    lexicon = load_lexicon(p.lexicon);
  }
  const auto fgs =
      build_foregrounds(queries, annotations, source, lexicon, table, a.common.gamma);

  std::vector<std::vector<BoxTarget>> targets(queries.size());
  if (!p.detections.empty()) {
    require_file(p.detections, "--detections");
    const Dataset data(load_detections(p.detections), queries);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto kept = prefilter(data.detections_for(queries[i]), a.common.delta);
      targets[i] = assign_targets(kept, fgs[i]);
    }
  }
  auto out = open_output(p.out);
  write_foregrounds(out, queries, fgs, targets);
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string config_path;
  std::string loss_csv;
  std::string loss = "binary_xe";
  std::size_t epochs = 30;
  double learning_rate = 5e-3;
  std::size_t batch_size = 8;
  double alpha = 0.1;
  std::size_t top_h = 10;
  std::uint64_t seed = 0;
  bool freeze_score_fc = false;
  std::optional<double> max_final_loss;
};

TrainConfig resolve_train_config(const TrainArgs& a, CLI::App* cmd, double& delta) {
  TrainConfig cfg;
  if (!a.config_path.empty()) {
    require_file(a.config_path, "--config");
    std::ifstream in(a.config_path);
    json j;
    try {
      j = json::parse(in);
      if (j.contains("loss")) cfg.loss = loss_kind_from_string(j["loss"].get<std::string>());
      if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
      if (j.contains("top_h")) cfg.top_h = j["top_h"].get<std::size_t>();
      if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
      if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
      if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
      if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("freeze_score_fc")) cfg.freeze_score_fc = j["freeze_score_fc"].get<bool>();
      if (j.contains("delta")) delta = j["delta"].get<double>();
    } catch (const json::exception& e) {
      throw ConfigError("bad training config " + a.config_path + ": " + e.what());
    }
  }
  auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
  if (given("--loss")) cfg.loss = loss_kind_from_string(a.loss);
  if (given("--epochs")) cfg.epochs = a.epochs;
  if (given("--lr")) cfg.learning_rate = a.learning_rate;
  if (given("--batch-size")) cfg.batch_size = a.batch_size;
  if (given("--alpha")) cfg.alpha = a.alpha;
  if (given("--top-h")) cfg.top_h = a.top_h;
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--freeze-score-fc")) cfg.freeze_score_fc = a.freeze_score_fc;
  if (given("--delta")) delta = a.common.delta;
  cfg.validate();
  return cfg;
}

int run_train(TrainArgs a, CLI::App* cmd) {
  auto& p = a.common.paths;
  double delta = a.common.delta;
  const TrainConfig cfg = resolve_train_config(a, cmd, delta);
  a.common.delta = delta;
  check_ranges(a.common);
  require_file(p.detections, "--detections");
  require_file(p.queries, "--queries");
  require_file(p.embeddings, "--embeddings");
  require_file(p.foreground, "--foreground");
  if (p.out.empty()) throw ConfigError("--out is required");

  const auto table = load_embeddings(p.embeddings);
  const Dataset data(load_detections(p.detections), load_queries(p.queries, a.common.max_tokens));
  const auto fgs = load_foregrounds(p.foreground, data.queries());
  const auto samples = build_training_samples(data, fgs, table, delta);
  const auto result = train(samples, cfg);
  save_params(p.out, result.params);

  if (!a.loss_csv.empty()) {
    std::ofstream out(a.loss_csv, std::ios::trunc);
    if (!out) throw DataError("cannot write " + a.loss_csv);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      out << e << ',' << format_double(result.epoch_loss[e]) << '\n';
    }
  }
  std::cout << "loss=" << to_string(cfg.loss) << " epochs=" << cfg.epochs
            << " lr=" << format_double(cfg.learning_rate) << " alpha=" << format_double(cfg.alpha)
            << " top_h=" << cfg.top_h << " seed=" << cfg.seed << '\n';
  if (!result.epoch_loss.empty()) {
    const double last = result.epoch_loss.back();
    std::cout << "final_loss=" << format_double(last) << '\n';
    if (a.max_final_loss && last > *a.max_final_loss) {
      std::cerr << "final loss " << last << " above --max-final-loss " << *a.max_final_loss
                << '\n';
      return kExitNumerical;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  Common common;
  bool baseline = false;
  std::size_t top_n = 100;
  double scale_relatedness = 1.0;
};

int run_filter(const FilterArgs& a) {
  const auto& p = a.common.paths;
  check_ranges(a.common);
  if (!(a.scale_relatedness > 0.0)) throw ConfigError("--scale-relatedness must be positive");
  require_file(p.detections, "--detections");
  require_file(p.queries, "--queries");
  if (!a.baseline) {
    require_file(p.embeddings, "--embeddings");
    require_file(p.params, "--params");
  }
  const Dataset data(load_detections(p.detections), load_queries(p.queries, a.common.max_tokens));
  std::optional<EmbeddingTable> table;
  std::optional<ScorerParams> params;
  if (!a.baseline) {
    table = load_embeddings(p.embeddings);
    const std::size_t v = data.visual_dim();
    params = load_params(p.params, v ? std::optional<std::size_t>(v) : std::nullopt,
                         table->dim());
  }
  auto out = open_output(p.out);

  PipelineConfig pipeline;
  pipeline.delta = a.common.delta;
  pipeline.nms_iou = a.common.nms_iou;
  pipeline.per_class = a.common.per_class;
  pipeline.relatedness_scale = a.scale_relatedness;
  pipeline.exec = Execution::kSerial;

  const auto& queries = data.queries();
  std::vector<std::string> lines(queries.size());
  std::vector<std::string> errors(queries.size());
  const auto nq = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < nq; ++i) {
    try {
      const auto& q = queries[i];
      const auto dets = data.detections_for(q);
      std::vector<std::size_t> source;
      for (std::size_t k = 0; k < dets.size(); ++k) {
        if (dets[k].confidence >= pipeline.delta) source.push_back(k);
      }
      RelatednessFn fn;
      if (params) fn = scorer_relatedness(*params, lookup_words(q.tokens, *table), Execution::kSerial);
      const auto kept = top_n(filter_proposals(dets, fn, pipeline), a.top_n);
      std::ostringstream os;
      for (std::size_t rank = 0; rank < kept.size(); ++rank) {
        const auto& s = kept[rank];
        json j;
        j["query_id"] = q.query_id;
        j["image_id"] = q.image_id;
        j["rank"] = rank;
        j["det_index"] = source[s.index];
        j["box"] = s.detection.box.to_array();
        j["label"] = s.detection.label;
        j["confidence"] = s.detection.confidence;
        j["relatedness"] = s.relatedness;
        j["fused"] = s.fused;
        os << j.dump() << '\n';
      }
      lines[i] = os.str();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw DataError("query " + queries[i].query_id + ": " + errors[i]);
    }
  }
  for (const auto& l : lines) out << l;
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  bool baseline_only = false;
  std::vector<std::size_t> budgets = {1, 5, kDefaultRealBudget, 20, 50, 100};
  std::string averaging = "micro";
  std::string plot;
  std::string plot_split = "all";
  std::string gt_source = "text";
};

int run_eval(const EvalArgs& a) {
  const auto& p = a.common.paths;
  check_ranges(a.common);
  require_file(p.detections, "--detections");
  require_file(p.queries, "--queries");
  require_file(p.embeddings, "--embeddings");
  if (!a.baseline_only && p.params.empty()) {
    throw ConfigError("--params is required unless --baseline-only is given");
  }
  if (a.averaging != "micro" && a.averaging != "macro") {
    throw ConfigError("--averaging must be micro or macro");
  }
  if (a.budgets.empty()) throw ConfigError("--budgets must not be empty");

  const auto table = load_embeddings(p.embeddings);
  const Dataset data(load_detections(p.detections), load_queries(p.queries, a.common.max_tokens));

  std::vector<ForegroundSet> fgs;
  std::string fg_origin = "none";
  if (!p.foreground.empty()) {
    require_file(p.foreground, "--foreground");
    fgs = load_foregrounds(p.foreground, data.queries());
    fg_origin = p.foreground;
  } else if (!p.annotations.empty()) {
    require_file(p.annotations, "--annotations");
    const auto source = gt_source_from_string(a.gt_source);
    std::unordered_set<std::string> lexicon;
    if (source == GtSource::kTextSimilarity) {
      require_file(p.lexicon, "--lexicon");
      lexicon = load_lexicon(p.lexicon);
    }
    fgs = build_foregrounds(data.queries(), load_annotations(p.annotations), source, lexicon,
                            table, a.common.gamma);
    fg_origin = a.gt_source;
  } else {
    for (const auto& q : data.queries()) fgs.push_back({q.referent, {}});
  }
  const auto queries = build_eval_queries(data, fgs, table);

  std::optional<ScorerParams> params;
  std::vector<MethodSpec> methods = {baseline_method()};
  if (!a.baseline_only) {
    require_file(p.params, "--params");
    const std::size_t v = data.visual_dim();
    params = load_params(p.params, v ? std::optional<std::size_t>(v) : std::nullopt, table.dim());
    methods.push_back(scorer_method(*params));
  }

  CompareOptions options;
  options.pipeline.delta = a.common.delta;
  options.pipeline.nms_iou = a.common.nms_iou;
  options.pipeline.per_class = a.common.per_class;
  options.budgets = a.budgets;
  options.averaging = a.averaging == "micro" ? Averaging::kMicro : Averaging::kMacro;
  auto report = compare(queries, methods, options);
  report.settings.insert(report.settings.begin() + 1, {"gamma", format_double(a.common.gamma)});
  report.settings.emplace_back("foreground", fg_origin);
  report.settings.emplace_back("params", a.baseline_only ? "none" : p.params);

  auto out = open_output(p.out);
  write_report_csv(out, report);
  if (!a.plot.empty()) {
    std::ofstream svg(a.plot, std::ios::trunc);
    if (!svg) throw DataError("cannot write " + a.plot);
    write_recall_svg(svg, report, a.plot_split);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::size_t boxes = 300;
  std::size_t visual_dim = 64;
  std::size_t word_dim = 32;
  std::size_t words = 10;
  std::size_t repeats = 50;
  double threshold_ms = 50.0;
  std::uint64_t seed = 0;
  int threads = 0;
};

double median_ms(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

int run_bench(const BenchArgs& a) {
  if (a.repeats == 0 || a.boxes == 0 || a.words == 0) {
    throw ConfigError("--boxes, --words and --repeats must be positive");
  }
  const auto params = ScorerParams::initialize(a.visual_dim, a.word_dim, a.seed);
  const auto dets = make_random_detections(a.boxes, a.visual_dim, a.seed + 1);
  Matrix words(a.words, a.word_dim);
  Rng rng(a.seed + 2);
  for (double& x : words.values()) x = rng.normal();

  auto time_one = [&](Execution exec) {
    std::vector<double> samples;
    std::size_t survivors = 0;
    for (std::size_t r = 0; r < a.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Matrix visual = stack_features(dets);
      const auto rel = relatedness(params, visual, words, exec);
      const auto kept = greedy_nms(fuse(dets, rel), kDefaultNmsIou, exec);
      const auto t1 = std::chrono::steady_clock::now();
      survivors = kept.size();
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return std::make_pair(median_ms(samples), survivors);
  };
  const auto [serial_ms, serial_kept] = time_one(Execution::kSerial);
  const auto [parallel_ms, parallel_kept] = time_one(Execution::kParallel);
  std::cout << "boxes=" << a.boxes << " v=" << a.visual_dim << " q=" << a.word_dim
            << " words=" << a.words << " threads=" << max_threads() << '\n';
  std::cout << "serial_ms=" << serial_ms << " parallel_ms=" << parallel_ms
            << " survivors=" << serial_kept << '\n';
  if (serial_kept != parallel_kept) {
    std::cerr << "serial and parallel kernels disagree\n";
    return kExitNumerical;
  }
  const double worst = std::max(serial_ms, parallel_ms);
  const bool ok = worst < a.threshold_ms;
  std::cout << (ok ? "PASS" : "FAIL") << " scoring+nms " << worst << " ms (threshold "
            << a.threshold_ms << " ms)\n";
  return ok ? kExitOk : kExitSlow;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qanms: query-aware proposal filtering"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic demo dataset");
  synth_cmd->add_option("--out-dir", synth.out_dir)->required();
  synth_cmd->add_option("--num-queries", synth.config.num_queries)->default_val(200);
  synth_cmd->add_option("--clutter", synth.config.clutter_per_image)->default_val(30);
  synth_cmd->add_option("--visual-dim", synth.config.visual_dim)->default_val(16);
  synth_cmd->add_option("--seed", synth.config.seed)->default_val(0);
  synth_cmd->add_option("--image-prefix", synth.config.image_prefix)->default_val("img");

  GenGtArgs gengt;
  auto* gengt_cmd = app.add_subcommand("gen-gt", "build foreground sets and box targets");
  add_data_flags(gengt_cmd, gengt.common);
  gengt_cmd->add_option("--annotations", gengt.common.paths.annotations,
                        "annotations.jsonl (region labels, or phrase-grounding output)");
  gengt_cmd->add_option("--lexicon", gengt.common.paths.lexicon, "noun_lexicon.txt");
  gengt_cmd->add_option("--gt-source", gengt.source, "text | wspg")->default_val("text");
  gengt_cmd->add_option("--gamma", gengt.common.gamma, "text-similarity threshold")
      ->default_val(kDefaultSimilarityThreshold);
  gengt_cmd->add_option("--delta", gengt.common.delta, "confidence pre-filter for targets")
      ->default_val(kDefaultConfidenceThreshold);
  gengt_cmd->add_option("--out", gengt.common.paths.out, "foreground.jsonl")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train the relatedness scorer");
  add_data_flags(train_cmd, tr.common);
  train_cmd->add_option("--foreground", tr.common.paths.foreground, "gen-gt output");
  train_cmd->add_option("--config", tr.config_path, "JSON training config");
  train_cmd->add_option("--loss", tr.loss, "binary_xe | ranking");
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--lr", tr.learning_rate);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--alpha", tr.alpha, "ranking margin");
  train_cmd->add_option("--top-h", tr.top_h, "negatives per positive");
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_flag("--freeze-score-fc", tr.freeze_score_fc);
  train_cmd->add_option("--delta", tr.common.delta)->default_val(kDefaultConfidenceThreshold);
  train_cmd->add_option("--max-final-loss", tr.max_final_loss,
                        "exit 4 if the last epoch loss is above this bound");
  train_cmd->add_option("--loss-csv", tr.loss_csv, "per-epoch loss log");
  train_cmd->add_option("--out", tr.common.paths.out, "parameter file")->required();

  FilterArgs fl;
  auto* filter_cmd = app.add_subcommand("filter", "fused-score NMS per query");
  add_data_flags(filter_cmd, fl.common);
  add_pipeline_flags(filter_cmd, fl.common);
  filter_cmd->add_option("--params", fl.common.paths.params, "trained parameter file");
  filter_cmd->add_flag("--baseline", fl.baseline, "confidence-only NMS");
  filter_cmd->add_option("--top-n", fl.top_n)->default_val(100);
  filter_cmd->add_option("--scale-relatedness", fl.scale_relatedness,
                         "debug: multiply relatedness before fusion")
      ->default_val(1.0);
  filter_cmd->add_option("--out", fl.common.paths.out, "filtered.jsonl")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "recall of referent and contextual objects");
  add_data_flags(eval_cmd, ev.common);
  add_pipeline_flags(eval_cmd, ev.common);
  eval_cmd->add_option("--params", ev.common.paths.params);
  eval_cmd->add_flag("--baseline-only", ev.baseline_only);
  eval_cmd->add_option("--foreground", ev.common.paths.foreground, "gen-gt output");
  eval_cmd->add_option("--annotations", ev.common.paths.annotations);
  eval_cmd->add_option("--lexicon", ev.common.paths.lexicon);
  eval_cmd->add_option("--gt-source", ev.gt_source)->default_val("text");
  eval_cmd->add_option("--gamma", ev.common.gamma)->default_val(kDefaultSimilarityThreshold);
  eval_cmd->add_option("--budgets", ev.budgets, "proposal budgets N")->delimiter(',');
  eval_cmd->add_option("--averaging", ev.averaging, "contextual recall: micro | macro")
      ->default_val("micro");
  eval_cmd->add_option("--plot", ev.plot, "SVG recall-vs-N plot");
  eval_cmd->add_option("--plot-split", ev.plot_split)->default_val("all");
  eval_cmd->add_option("--out", ev.common.paths.out, "report.csv")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "scoring + NMS throughput");
  bench_cmd->add_option("--boxes", bench.boxes)->default_val(300);
  bench_cmd->add_option("--visual-dim", bench.visual_dim)->default_val(64);
  bench_cmd->add_option("--word-dim", bench.word_dim)->default_val(32);
  bench_cmd->add_option("--words", bench.words)->default_val(10);
  bench_cmd->add_option("--repeats", bench.repeats)->default_val(50);
  bench_cmd->add_option("--threshold-ms", bench.threshold_ms)->default_val(50.0);
  bench_cmd->add_option("--seed", bench.seed)->default_val(0);
  bench_cmd->add_option("--threads", bench.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*gengt_cmd) {
      set_num_threads(gengt.common.threads);
      return run_gen_gt(gengt);
    }
    if (*train_cmd) {
      set_num_threads(tr.common.threads);
      return run_train(tr, train_cmd);
    }
    if (*filter_cmd) {
      set_num_threads(fl.common.threads);
      return run_filter(fl);
    }
    if (*eval_cmd) {
      set_num_threads(ev.common.threads);
      return run_eval(ev);
    }
    if (*bench_cmd) {
      set_num_threads(bench.threads);
      return run_bench(bench);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
