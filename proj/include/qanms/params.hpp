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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qanms/matrix.hpp"

namespace qanms {

/// Fully connected layer: y = weight * x + bias, weight is out x in.
struct Dense {
  Matrix weight;
  std::vector<double> bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const Dense&, const Dense&) = default;
};

/// Two-layer perceptron with a ReLU between the layers.
struct Mlp {
  Dense hidden;
  Dense out;

  Mlp() = default;
  Mlp(std::size_t in, std::size_t width, std::size_t out_dim)
      : hidden(in, width), out(width, out_dim) {}

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Learnable weights of the relatedness scorer for visual dimension v and
/// word dimension q:
///   attn_mlp   v -> q   (projects a box feature for the attention logits)
///   attn_fc    2q -> 1  (logit over the concatenation [projected box; word])
///   fusion_mlp v -> q   (box feature multiplied with the pooled query)
///   score_fc   q -> 1   (relatedness logit)
struct ScorerParams {
  std::size_t visual_dim = 0;
  std::size_t word_dim = 0;
  Mlp attn_mlp;
  Dense attn_fc;
  Mlp fusion_mlp;
  Dense score_fc;

  ScorerParams() = default;
  /// All-zero parameters of the given shape.
  ScorerParams(std::size_t v, std::size_t q);

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static ScorerParams initialize(std::size_t v, std::size_t q,
                                 std::uint64_t seed);

  ScorerParams zeros_like() const { return ScorerParams(visual_dim, word_dim); }

  std::size_t num_values() const;

  /// Visits every parameter array in a fixed order. The callback receives a
  /// stable name, a mutable span over the values, and the layer fan-in.
  template <typename F>
  void for_each_tensor(F&& fn) {
    visit_dense(fn, "attn_mlp.hidden", attn_mlp.hidden);
    visit_dense(fn, "attn_mlp.out", attn_mlp.out);
    visit_dense(fn, "attn_fc", attn_fc);
    visit_dense(fn, "fusion_mlp.hidden", fusion_mlp.hidden);
    visit_dense(fn, "fusion_mlp.out", fusion_mlp.out);
    visit_dense(fn, "score_fc", score_fc);
  }

  /// Throws NumericalError naming the first non-finite entry.
  void check_finite() const;

  friend bool operator==(const ScorerParams&, const ScorerParams&) = default;

 private:
  template <typename F>
  static void visit_dense(F& fn, std::string_view prefix, Dense& d) {
    const std::size_t fan_in = d.in_dim();
    fn(std::string(prefix) + ".weight", d.weight.values(), fan_in);
    fn(std::string(prefix) + ".bias", std::span<double>(d.bias), fan_in);
  }
};

}  // namespace qanms
