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

#include "qanms/features_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qanms/errors.hpp"

namespace qanms {
namespace {

TEST(LoadDetections, OneLine) {
  std::istringstream in(
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "cat", "confidence": 0.9, "feature": [1, 2, 3]})"
      "\n");
  const auto images = read_detections(in);
  ASSERT_EQ(images.size(), 1u);
  EXPECT_EQ(images[0].image_id, "a");
  ASSERT_EQ(images[0].detections.size(), 1u);
  EXPECT_EQ(images[0].detections[0].box, Box(0, 0, 2, 2));
  EXPECT_EQ(images[0].detections[0].feature, (std::vector<double>{1, 2, 3}));
}

TEST(LoadDetections, EmptyInput) {
  std::istringstream in("");
  EXPECT_TRUE(read_detections(in).empty());
}

TEST(LoadDetections, ConfidenceOutOfRange) {
  std::istringstream in(
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "cat", "confidence": 1.3, "feature": [1]})");
  EXPECT_THROW(read_detections(in), SchemaError);
}

TEST(LoadDetections, MalformedLineNamesLineNumber) {
  std::istringstream in(
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "cat", "confidence": 0.3, "feature": [1]})"
      "\n{not json\n");
  try {
    read_detections(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDetections, DimensionMismatch) {
  std::istringstream in(
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "c", "confidence": 0.3, "feature": [1, 2]})"
      "\n"
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "c", "confidence": 0.3, "feature": [1]})");
  EXPECT_THROW(read_detections(in), DimensionError);
  std::istringstream pinned(
      R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "c", "confidence": 0.3, "feature": [1, 2]})");
  EXPECT_THROW(read_detections(pinned, 3), DimensionError);
}

TEST(LoadDetections, InvalidBoxAndMissingField) {
  std::istringstream neg(
      R"({"image_id": "a", "box": [3, 0, 2, 2], "label": "c", "confidence": 0.3, "feature": [1]})");
  EXPECT_THROW(read_detections(neg), SchemaError);
  std::istringstream missing(R"({"image_id": "a", "box": [0, 0, 2, 2], "label": "c", "feature": [1]})");
  EXPECT_THROW(read_detections(missing), SchemaError);
}

TEST(LoadDetections, GroupsByImageInFirstAppearanceOrder) {
  std::ostringstream text;
  for (const char* id : {"b", "a", "b"}) {
    text << R"({"image_id": ")" << id
         << R"(", "box": [0, 0, 1, 1], "label": "c", "confidence": 0.5, "feature": [0.5]})" << '\n';
  }
  std::istringstream in1(text.str()), in2(text.str());
  const auto images = read_detections(in1);
  ASSERT_EQ(images.size(), 2u);
  EXPECT_EQ(images[0].image_id, "b");
  EXPECT_EQ(images[0].detections.size(), 2u);
  EXPECT_EQ(images, read_detections(in2));
}

TEST(Detections, WriteReadRoundTrip) {
  Rng rng(3);
  std::vector<ImageDetections> images(2);
  images[0].image_id = "x";
  images[1].image_id = "y";
  for (auto& img : images) {
    for (int k = 0; k < 4; ++k) {
      img.detections.push_back({oracle::random_box(rng), "lbl", rng.uniform(), {rng.normal(), rng.normal()}});
    }
  }
  std::stringstream buf;
  write_detections(buf, images);
  EXPECT_EQ(read_detections(buf), images);
}

TEST(Tokens, Normalization) {
  EXPECT_EQ(normalize_tokens("The RED cat, on a towel!"),
            (std::vector<std::string>{"the", "red", "cat", "on", "a", "towel"}));
  EXPECT_EQ(normalize_tokens(std::vector<std::string>{"Left-most", "Dog."}),
            (std::vector<std::string>{"leftmost", "dog"}));
  EXPECT_EQ(normalize_tokens("a b c d e", 3), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Queries, ParseAndValidate) {
  std::istringstream in(
      R"({"query_id": "q1", "image_id": "a", "tokens": ["Red", "CAT"], "referent_box": [0, 0, 1, 1]})"
      "\n"
      R"({"query_id": "q2", "image_id": "a", "tokens": ["dog"], "referent_box": null, "split": "testA", "nouns": ["Dog"]})");
  const auto qs = read_queries(in);
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].tokens, (std::vector<std::string>{"red", "cat"}));
  EXPECT_EQ(qs[0].referent, Box(0, 0, 1, 1));
  EXPECT_EQ(qs[0].split, "all");
  EXPECT_FALSE(qs[1].referent.has_value());
  EXPECT_EQ(qs[1].split, "testA");
  EXPECT_EQ(qs[1].nouns, (std::vector<std::string>{"dog"}));

  std::stringstream buf;
  write_queries(buf, qs);
  EXPECT_EQ(read_queries(buf), qs);
}

TEST(Queries, EmptyAfterNormalizationRejected) {
  std::istringstream in(R"({"query_id": "q", "image_id": "a", "tokens": ["!!", "..."]})");
  EXPECT_THROW(read_queries(in), SchemaError);
}

TEST(Queries, TruncatedToMaximumLength) {
  std::istringstream in(R"({"query_id": "q", "image_id": "a", "tokens": ["a","b","c","d"]})");
  EXPECT_EQ(read_queries(in, 2)[0].tokens, (std::vector<std::string>{"a", "b"}));
}

TEST(Embeddings, GloveTextFormatAndUnk) {
  std::istringstream in("cat 1 0 0\ndog 0 1 0.5\n");
  const auto table = read_embeddings(in);
  EXPECT_EQ(table.dim(), 3u);
  EXPECT_TRUE(table.contains("unk"));
  EXPECT_EQ(table.get("unk"), (std::vector<double>{0, 0, 0}));

  const auto w = lookup_words({"dog", "zebra", "cat"}, table);
  ASSERT_EQ(w.rows(), 3u);
  EXPECT_EQ(w(0, 2), 0.5);
  EXPECT_EQ(w(1, 0), 0.0);  // zebra -> unk
  EXPECT_EQ(w(1, 1), 0.0);
  EXPECT_EQ(w(2, 0), 1.0);
}

TEST(Embeddings, ExplicitUnkIsKept) {
  std::istringstream in("unk 0.1 0.2\ncat 1 1\n");
  const auto table = read_embeddings(in);
  EXPECT_EQ(lookup_words({"nope"}, table)(0, 1), 0.2);
}

TEST(Embeddings, RaggedRowsRejected) {
  std::istringstream in("cat 1 0 0\ndog 0 1\n");
  EXPECT_THROW(read_embeddings(in), SchemaError);
  std::istringstream bad("cat 1 x 0\n");
  EXPECT_THROW(read_embeddings(bad), ParseError);
}

TEST(Embeddings, WriteReadRoundTrip) {
  EmbeddingTable t(2);
  t.set("a", {0.1, 1.0 / 3.0});
  t.set("b", {-2.5e-7, 12345.678});
  std::stringstream buf;
  write_embeddings(buf, t);
  const auto back = read_embeddings(buf);
  EXPECT_EQ(back.get("a"), t.get("a"));
  EXPECT_EQ(back.get("b"), t.get("b"));
}

TEST(Annotations, ParseWithOptionalQuery) {
  std::istringstream in(
      R"({"image_id": "a", "box": [0, 0, 1, 1], "label": "teddy bear"})"
      "\n"
      R"({"image_id": "a", "box": [1, 1, 2, 2], "label": "cat", "query_id": "q7"})");
  const auto anns = read_annotations(in);
  ASSERT_EQ(anns.size(), 2u);
  EXPECT_EQ(anns[0].label, "teddy bear");
  EXPECT_FALSE(anns[0].query_id.has_value());
  EXPECT_EQ(anns[1].query_id, "q7");
}

TEST(Lexicon, IgnoresBlankAndComments) {
  std::istringstream in("# nouns\ncat\n\nDog\n  towel  \n");
  const auto lex = read_lexicon(in);
  EXPECT_EQ(lex.size(), 3u);
  EXPECT_TRUE(lex.contains("dog"));
}

TEST(Params, RoundTripIsBitExact) {
  const auto p = ScorerParams::initialize(7, 5, 42);
  std::stringstream buf;
  write_params(buf, p);
  const auto back = read_params(buf);
  EXPECT_EQ(back, p);
  EXPECT_EQ(oracle::flatten(back), oracle::flatten(p));
}

TEST(Params, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "qanms_params_test.bin";
  const auto p = ScorerParams::initialize(4, 3, 1);
  save_params(path, p);
  EXPECT_EQ(load_params(path, 4, 3), p);
  std::filesystem::remove(path);
}

TEST(Params, TruncatedFileRejected) {
  const auto p = ScorerParams::initialize(4, 3, 1);
  std::stringstream buf;
  write_params(buf, p);
  const std::string bytes = buf.str();
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(read_params(in), DataError) << "cut at " << cut;
  }
  std::istringstream extra(bytes + "x");
  EXPECT_THROW(read_params(extra), DataError);
}

TEST(Params, HeaderDimensionMismatch) {
  const auto p = ScorerParams::initialize(64, 8, 1);
  std::stringstream buf;
  write_params(buf, p);
  try {
    read_params(buf, 128, 8);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("v=64"), std::string::npos) << e.what();
  }
}

TEST(Params, InitializationIsSeededAndBounded) {
  const auto a = ScorerParams::initialize(9, 4, 5);
  EXPECT_EQ(a, ScorerParams::initialize(9, 4, 5));
  EXPECT_NE(a, ScorerParams::initialize(9, 4, 6));
  auto copy = a;
  copy.for_each_tensor([](const std::string&, std::span<double> s, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double x : s) {
      EXPECT_LE(std::abs(x), bound);
    }
  });
}

}  // namespace
}  // namespace qanms
