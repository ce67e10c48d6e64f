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

#include "qanms/params.hpp"

#include <cmath>
#include <string>

#include "qanms/errors.hpp"
#include "qanms/rng.hpp"

namespace qanms {

ScorerParams::ScorerParams(std::size_t v, std::size_t q)
    : visual_dim(v),
      word_dim(q),
      attn_mlp(v, q, q),
      attn_fc(2 * q, 1),
      fusion_mlp(v, q, q),
      score_fc(q, 1) {}

ScorerParams ScorerParams::initialize(std::size_t v, std::size_t q,
                                      std::uint64_t seed) {
  ScorerParams p(v, q);
  Rng rng(seed);
  p.for_each_tensor([&](const std::string&, std::span<double> values,
                        std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : values) x = rng.uniform(-bound, bound);
  });
  return p;
}

std::size_t ScorerParams::num_values() const {
  std::size_t n = 0;
  const_cast<ScorerParams*>(this)->for_each_tensor(
      [&](const std::string&, std::span<double> values, std::size_t) {
        n += values.size();
      });
  return n;
}

void ScorerParams::check_finite() const {
  const_cast<ScorerParams*>(this)->for_each_tensor(
      [](const std::string& name, std::span<double> values, std::size_t) {
        for (std::size_t i = 0; i < values.size(); ++i) {
          if (!std::isfinite(values[i])) {
            throw NumericalError("non-finite parameter " + name + "[" +
                                 std::to_string(i) + "]");
          }
        }
      });
}

}  // namespace qanms
