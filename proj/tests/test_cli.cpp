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

// Runs the built command-line tool end to end and compares its files with
// the in-process library results.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qanms/dataset.hpp"
#include "qanms/evaluation.hpp"
#include "qanms/features_io.hpp"

namespace qanms {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("qanms_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("synth --out-dir " + dir_.string() + " --num-queries 24 --clutter 10 --seed 3"), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static int run(const std::string& args) {
    const std::string cmd = std::string(QANMS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static std::string data_flags() {
    return " --detections " + path("detections.jsonl") + " --queries " + path("queries.jsonl") +
           " --embeddings " + path("embeddings.txt");
  }
  static std::string gen_gt(const std::string& out, const std::string& extra = "") {
    return "gen-gt --queries " + path("queries.jsonl") + " --annotations " + path("annotations.jsonl") +
           " --embeddings " + path("embeddings.txt") + " --lexicon " + path("noun_lexicon.txt") +
           " --detections " + path("detections.jsonl") + " --out " + path(out) + extra;
  }
  static std::string train_cmd(const std::string& fg, const std::string& out, const std::string& extra) {
    return "train" + data_flags() + " --foreground " + path(fg) + " --out " + path(out) + extra;
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, GenGtMatchesLibraryAndIsReproducible) {
  ASSERT_EQ(run(gen_gt("fg1.jsonl")), 0);
  ASSERT_EQ(run(gen_gt("fg2.jsonl")), 0);
  EXPECT_EQ(slurp(path("fg1.jsonl")), slurp(path("fg2.jsonl")));

  const auto queries = load_queries(path("queries.jsonl"));
  const auto table = load_embeddings(path("embeddings.txt"));
  const auto fgs = build_foregrounds(queries, load_annotations(path("annotations.jsonl")),
                                     GtSource::kTextSimilarity, load_lexicon(path("noun_lexicon.txt")),
                                     table);
  const Dataset data(load_detections(path("detections.jsonl")), queries);
  std::vector<std::vector<BoxTarget>> targets;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    targets.push_back(assign_targets(prefilter(data.detections_for(queries[i]), 0.05), fgs[i]));
  }
  std::ostringstream expected;
  write_foregrounds(expected, queries, fgs, targets);
  EXPECT_EQ(slurp(path("fg1.jsonl")), expected.str());
  EXPECT_EQ(load_foregrounds(path("fg1.jsonl"), queries), fgs);
}

TEST_F(CliTest, PhraseGroundingImportIsVerbatim) {
  ASSERT_EQ(run("gen-gt --gt-source wspg --queries " + path("queries.jsonl") + " --annotations " +
                path("annotations.jsonl") + " --out " + path("fg_wspg.jsonl")),
            0);
  const auto queries = load_queries(path("queries.jsonl"));
  const auto anns = load_annotations(path("annotations.jsonl"));
  const auto fgs = load_foregrounds(path("fg_wspg.jsonl"), queries);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto mine = annotations_for(queries[i], anns);
    ASSERT_EQ(fgs[i].contextual.size(), mine.size());
    for (std::size_t k = 0; k < mine.size(); ++k) {
      EXPECT_EQ(fgs[i].contextual[k].box, mine[k].box);
      EXPECT_EQ(fgs[i].contextual[k].provenance, Provenance::kPhraseGrounding);
    }
  }
}

TEST_F(CliTest, TrainIsSeedDeterministicAndZeroEpochsGivesInit) {
  ASSERT_EQ(run(gen_gt("fg_train.jsonl")), 0);
  ASSERT_EQ(run(train_cmd("fg_train.jsonl", "p1.bin", " --epochs 3 --seed 4")), 0);
  ASSERT_EQ(run(train_cmd("fg_train.jsonl", "p2.bin", " --epochs 3 --seed 4")), 0);
  EXPECT_EQ(slurp(path("p1.bin")), slurp(path("p2.bin")));

  ASSERT_EQ(run(train_cmd("fg_train.jsonl", "p0.bin", " --epochs 0 --seed 4")), 0);
  const auto table = load_embeddings(path("embeddings.txt"));
  EXPECT_EQ(load_params(path("p0.bin")), ScorerParams::initialize(16, table.dim(), 4));

  std::ofstream(path("cfg.json")) << R"({"loss": "ranking", "epochs": 2, "seed": 4})";
  ASSERT_EQ(run(train_cmd("fg_train.jsonl", "pc.bin", " --config " + path("cfg.json"))), 0);
  ASSERT_EQ(run(train_cmd("fg_train.jsonl", "pf.bin", " --loss ranking --epochs 2 --seed 4")), 0);
  EXPECT_EQ(slurp(path("pc.bin")), slurp(path("pf.bin")));
}

TEST_F(CliTest, FilterBaselineIsConfidenceNms) {
  ASSERT_EQ(run("filter --baseline" + data_flags() + " --out " + path("base.jsonl")), 0);
  const auto queries = load_queries(path("queries.jsonl"));
  const Dataset data(load_detections(path("detections.jsonl")), queries);
  std::map<std::string, std::vector<Box>> got;
  std::ifstream in(path("base.jsonl"));
  for (std::string line; std::getline(in, line);) {
    const auto j = json::parse(line);
    got[j["query_id"]].push_back(Box::from_array(j["box"].get<std::array<double, 4>>()));
  }
  for (const auto& q : queries) {
    const auto kept = top_n(greedy_nms(fuse_baseline(prefilter(data.detections_for(q), 0.05))), 100);
    std::vector<Box> want;
    for (const auto& k : kept) want.push_back(k.detection.box);
    EXPECT_EQ(got[q.query_id], want) << q.query_id;
  }
}

TEST_F(CliTest, RelatednessScaleDoesNotChangeSurvivors) {
  ASSERT_EQ(run(gen_gt("fg_scale.jsonl")), 0);
  ASSERT_EQ(run(train_cmd("fg_scale.jsonl", "ps.bin", " --epochs 2")), 0);
  const std::string base = "filter" + data_flags() + " --params " + path("ps.bin");
  ASSERT_EQ(run(base + " --out " + path("s1.jsonl")), 0);
  ASSERT_EQ(run(base + " --scale-relatedness 2 --out " + path("s2.jsonl")), 0);
  auto indices = [](const std::string& p) {
    std::vector<std::pair<std::string, std::size_t>> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
      const auto j = json::parse(line);
      out.emplace_back(j["query_id"], j["det_index"]);
    }
    return out;
  };
  const auto a = indices(path("s1.jsonl"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, indices(path("s2.jsonl")));
}

TEST_F(CliTest, EmptyDetectionsGiveEmptyOutput) {
  std::ofstream(path("empty.jsonl")).close();
  ASSERT_EQ(run("filter --baseline --detections " + path("empty.jsonl") + " --queries " +
                path("queries.jsonl") + " --out " + path("empty_out.jsonl")),
            0);
  EXPECT_TRUE(slurp(path("empty_out.jsonl")).empty());
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("eval" + data_flags() + " --out " + path("r.csv")), 2);
  EXPECT_EQ(run("filter --baseline" + data_flags() + " --nms-iou 1.5 --out " + path("x.jsonl")), 2);
  EXPECT_EQ(run("filter --baseline" + data_flags() + " --delta -0.1 --out " + path("x.jsonl")), 2);
  EXPECT_EQ(run("eval" + data_flags() + " --params " + path("does_not_exist.bin") + " --out " + path("r.csv")), 2);

  std::ofstream(path("bad.jsonl"))
      << R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "c", "confidence": 1.3, "feature": [1]})" << '\n';
  EXPECT_EQ(run("filter --baseline --detections " + path("bad.jsonl") + " --queries " + path("queries.jsonl") +
                " --out " + path("x.jsonl")),
            3);
  save_params(path("wrong_dim.bin"), ScorerParams::initialize(5, 3, 0));
  EXPECT_EQ(run("filter" + data_flags() + " --params " + path("wrong_dim.bin") + " --out " + path("x.jsonl")), 3);
}

TEST_F(CliTest, EvalFileHandoffMatchesInProcess) {
  ASSERT_EQ(run(gen_gt("fg_eval.jsonl")), 0);
  ASSERT_EQ(run(train_cmd("fg_eval.jsonl", "pe.bin", " --epochs 3")), 0);
  ASSERT_EQ(run("eval" + data_flags() + " --params " + path("pe.bin") + " --foreground " + path("fg_eval.jsonl") +
                " --budgets 1,10,100 --out " + path("report.csv") + " --plot " + path("plot.svg")),
            0);
  const std::string csv = slurp(path("report.csv"));
  EXPECT_NE(csv.find("# gamma=0.4\n"), std::string::npos);
  EXPECT_NE(slurp(path("plot.svg")).find("<svg"), std::string::npos);

  // Same pipeline in process.
  const auto table = load_embeddings(path("embeddings.txt"));
  const Dataset data(load_detections(path("detections.jsonl")), load_queries(path("queries.jsonl")));
  const auto fgs = build_foregrounds(data.queries(), load_annotations(path("annotations.jsonl")),
                                     GtSource::kTextSimilarity, load_lexicon(path("noun_lexicon.txt")),
                                     table);
  const auto samples = build_training_samples(data, fgs, table);
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto params = train(samples, cfg).params;
  EXPECT_EQ(params, load_params(path("pe.bin")));
  const auto queries = build_eval_queries(data, fgs, table);
  const std::vector<MethodSpec> methods = {baseline_method(), scorer_method(params)};
  CompareOptions opt;
  opt.budgets = {1, 10, 100};
  std::ostringstream expected;
  write_report_csv(expected, compare(queries, methods, opt));
  EXPECT_EQ(data_lines(csv), data_lines(expected.str()));
}

}  // namespace
}  // namespace qanms
