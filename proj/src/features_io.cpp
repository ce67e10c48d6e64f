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

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "qanms/errors.hpp"

namespace qanms {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path,
                         std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::string at_line(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

// Calls fn(json, line_number) for every non-blank line.
void for_each_json_line(std::istream& in,
                        const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(at_line(lineno) + "malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(at_line(lineno) + "expected an object");
    try {
      fn(j, lineno);
    } catch (const json::exception& e) {
      throw SchemaError(at_line(lineno) + e.what());
    }
  }
}

const json& require(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(at_line(line) + "missing field '" + key + "'");
  }
  return *it;
}

double finite_number(const json& j, std::size_t line, const char* what) {
  if (!j.is_number()) throw SchemaError(at_line(line) + what + " is not a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw SchemaError(at_line(line) + what + " is not finite");
  return x;
}

Box parse_box(const json& j, std::size_t line) {
  if (!j.is_array() || j.size() != 4) {
    throw SchemaError(at_line(line) + "box must be [x1, y1, x2, y2]");
  }
  std::array<double, 4> c{};
  for (std::size_t i = 0; i < 4; ++i) c[i] = finite_number(j[i], line, "box coordinate");
  try {
    return Box::from_array(c);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(at_line(line) + e.what());
  }
}

json box_json(const Box& b) { return json(b.to_array()); }

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

// ---------------------------------------------------------------- embeddings

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  vectors_.emplace(kUnknownWord, std::vector<double>(dim, 0.0));
}

void EmbeddingTable::set(const std::string& word, std::vector<double> vec) {
  if (vec.size() != dim_) {
    throw DimensionError("embedding for '" + word + "' has dimension " +
                         std::to_string(vec.size()) + ", expected " +
                         std::to_string(dim_));
  }
  if (!std::all_of(vec.begin(), vec.end(), [](double x) { return std::isfinite(x); })) {
    throw SchemaError("embedding for '" + word + "' has non-finite entries");
  }
  vectors_[word] = std::move(vec);
}

const std::vector<double>& EmbeddingTable::get(const std::string& word) const {
  auto it = vectors_.find(word);
  if (it == vectors_.end()) return vectors_.at(kUnknownWord);
  return it->second;
}

std::vector<std::string> EmbeddingTable::words() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [w, _] : vectors_) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> vec;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw ParseError(at_line(lineno) + "bad float '" + tok + "'");
      }
      vec.push_back(x);
    }
    if (vec.empty()) throw ParseError(at_line(lineno) + "word without vector");
    if (!table) table.emplace(vec.size());
    try {
      table->set(word, std::move(vec));
    } catch (const DataError& e) {
      throw SchemaError(at_line(lineno) + e.what());
    }
  }
  if (!table) throw SchemaError("embedding file is empty");
  return std::move(*table);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  for (const auto& word : table.words()) {
    out << word;
    for (double x : table.get(word)) out << ' ' << json(x).dump();
    out << '\n';
  }
}

Matrix lookup_words(const std::vector<std::string>& tokens,
                    const EmbeddingTable& table) {
  Matrix w(tokens.size(), table.dim());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto& vec = table.get(tokens[j]);
    std::copy(vec.begin(), vec.end(), w.row(j).begin());
  }
  return w;
}

Matrix stack_features(const std::vector<Detection>& detections) {
  if (detections.empty()) return Matrix();
  const std::size_t dim = detections.front().feature.size();
  Matrix v(detections.size(), dim);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& f = detections[i].feature;
    if (f.size() != dim) throw DimensionError("inconsistent feature dimensions");
    std::copy(f.begin(), f.end(), v.row(i).begin());
  }
  return v;
}

// ---------------------------------------------------------------- tokens

std::vector<std::string> normalize_tokens(const std::string& text,
                                          std::size_t max_tokens) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  if (out.size() > max_tokens) out.resize(max_tokens);
  return out;
}

std::vector<std::string> normalize_tokens(const std::vector<std::string>& raw,
                                          std::size_t max_tokens) {
  std::string joined;
  for (const auto& t : raw) {
    joined += t;
    joined += ' ';
  }
  return normalize_tokens(joined, max_tokens);
}

// ---------------------------------------------------------------- detections

std::vector<ImageDetections> read_detections(
    std::istream& in, std::optional<std::size_t> expected_dim) {
  std::vector<ImageDetections> images;
  std::unordered_map<std::string, std::size_t> slot;
  std::optional<std::size_t> dim = expected_dim;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    Detection d;
    const auto image_id = require(j, "image_id", line).get<std::string>();
    d.box = parse_box(require(j, "box", line), line);
    d.label = require(j, "label", line).get<std::string>();
    d.confidence = finite_number(require(j, "confidence", line), line, "confidence");
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw SchemaError(at_line(line) + "confidence " + std::to_string(d.confidence) +
                        " outside [0, 1]");
    }
    const json& feat = require(j, "feature", line);
    if (!feat.is_array()) throw SchemaError(at_line(line) + "feature must be an array");
    d.feature.reserve(feat.size());
    for (const auto& x : feat) d.feature.push_back(finite_number(x, line, "feature entry"));
    if (!dim) dim = d.feature.size();
    if (d.feature.size() != *dim) {
      throw DimensionError(at_line(line) + "feature dimension " +
                           std::to_string(d.feature.size()) + ", expected " +
                           std::to_string(*dim));
    }
    auto [it, inserted] = slot.try_emplace(image_id, images.size());
    if (inserted) images.push_back({image_id, {}});
    images[it->second].detections.push_back(std::move(d));
  });
  return images;
}

std::vector<ImageDetections> load_detections(
    const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  auto in = open_input(path);
  return read_detections(in, expected_dim);
}

void write_detections(std::ostream& out,
                      const std::vector<ImageDetections>& images) {
  for (const auto& img : images) {
    for (const auto& d : img.detections) {
      json j;
      j["image_id"] = img.image_id;
      j["box"] = box_json(d.box);
      j["label"] = d.label;
      j["confidence"] = d.confidence;
      j["feature"] = d.feature;
      out << j.dump() << '\n';
    }
  }
}

// ---------------------------------------------------------------- queries

std::vector<QueryRecord> read_queries(std::istream& in, std::size_t max_tokens) {
  std::vector<QueryRecord> out;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    QueryRecord q;
    q.query_id = require(j, "query_id", line).get<std::string>();
    q.image_id = require(j, "image_id", line).get<std::string>();
    const json& toks = require(j, "tokens", line);
    if (!toks.is_array()) throw SchemaError(at_line(line) + "tokens must be an array");
    q.tokens = normalize_tokens(toks.get<std::vector<std::string>>(), max_tokens);
    if (q.tokens.empty()) {
      throw SchemaError(at_line(line) + "query '" + q.query_id +
                        "' has no tokens after normalization");
    }
    if (auto it = j.find("referent_box"); it != j.end() && !it->is_null()) {
      q.referent = parse_box(*it, line);
    }
    if (auto it = j.find("split"); it != j.end() && !it->is_null()) {
      q.split = it->get<std::string>();
    }
    if (auto it = j.find("nouns"); it != j.end() && !it->is_null()) {
      std::vector<std::string> nouns;
      for (const auto& n : it->get<std::vector<std::string>>()) {
        nouns.push_back(lowercase(n));
      }
      q.nouns = std::move(nouns);
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path,
                                      std::size_t max_tokens) {
  auto in = open_input(path);
  return read_queries(in, max_tokens);
}

void write_queries(std::ostream& out, const std::vector<QueryRecord>& queries) {
  for (const auto& q : queries) {
    json j;
    j["query_id"] = q.query_id;
    j["image_id"] = q.image_id;
    j["tokens"] = q.tokens;
    j["referent_box"] = q.referent ? box_json(*q.referent) : json(nullptr);
    if (q.split != "all") j["split"] = q.split;
    if (q.nouns) j["nouns"] = *q.nouns;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------- annotations

std::vector<Annotation> read_annotations(std::istream& in) {
  std::vector<Annotation> out;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    Annotation a;
    a.image_id = require(j, "image_id", line).get<std::string>();
    a.box = parse_box(require(j, "box", line), line);
    a.label = require(j, "label", line).get<std::string>();
    if (auto it = j.find("query_id"); it != j.end() && !it->is_null()) {
      a.query_id = it->get<std::string>();
    }
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_annotations(in);
}

void write_annotations(std::ostream& out,
                       const std::vector<Annotation>& annotations) {
  for (const auto& a : annotations) {
    json j;
    j["image_id"] = a.image_id;
    j["box"] = box_json(a.box);
    j["label"] = a.label;
    if (a.query_id) j["query_id"] = *a.query_id;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------- lexicon

std::unordered_set<std::string> read_lexicon(std::istream& in) {
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || word.front() == '#') continue;
    out.insert(lowercase(word));
  }
  return out;
}

std::unordered_set<std::string> load_lexicon(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_lexicon(in);
}

// ---------------------------------------------------------------- params

namespace {

constexpr char kMagic[8] = {'Q', 'A', 'N', 'M', 'S', 'P', 'R', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "parameter files are written in host byte order");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(std::string("truncated parameter file while reading ") + what);
  }
  return value;
}

}  // namespace

void write_params(std::ostream& out, const ScorerParams& params) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, params.visual_dim);
  put<std::uint64_t>(out, params.word_dim);
  put<std::uint64_t>(out, params.num_values());
  const_cast<ScorerParams&>(params).for_each_tensor(
      [&](const std::string&, std::span<double> values, std::size_t) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
      });
}

ScorerParams read_params(std::istream& in,
                         std::optional<std::size_t> expected_visual_dim,
                         std::optional<std::size_t> expected_word_dim) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a parameter file (bad magic)");
  }
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kFormatVersion) {
    throw DataError("unsupported parameter format version " + std::to_string(version));
  }
  const auto v = take<std::uint64_t>(in, "visual dimension");
  const auto q = take<std::uint64_t>(in, "word dimension");
  const auto count = take<std::uint64_t>(in, "value count");
  if (v == 0 || q == 0 || v > (1u << 24) || q > (1u << 24)) {
    throw DataError("implausible parameter dimensions in header");
  }
  if (expected_visual_dim && *expected_visual_dim != v) {
    throw DimensionError("parameter file has visual dimension v=" + std::to_string(v) +
                         " but the data has v=" + std::to_string(*expected_visual_dim));
  }
  if (expected_word_dim && *expected_word_dim != q) {
    throw DimensionError("parameter file has word dimension q=" + std::to_string(q) +
                         " but the data has q=" + std::to_string(*expected_word_dim));
  }
  ScorerParams p(v, q);
  if (count != p.num_values()) {
    throw DataError("parameter count " + std::to_string(count) +
                    " does not match header shape (" + std::to_string(p.num_values()) + ")");
  }
  p.for_each_tensor([&](const std::string& name, std::span<double> values, std::size_t) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size_bytes()))) {
      throw DataError("truncated parameter file in tensor " + name);
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after parameter data");
  }
  p.check_finite();
  return p;
}

void save_params(const std::filesystem::path& path, const ScorerParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_params(out, params);
  if (!out) throw DataError("write failed for " + path.string());
}

ScorerParams load_params(const std::filesystem::path& path,
                         std::optional<std::size_t> expected_visual_dim,
                         std::optional<std::size_t> expected_word_dim) {
  auto in = open_input(path, std::ios::binary);
  return read_params(in, expected_visual_dim, expected_word_dim);
}

}  // namespace qanms
