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

// Query-conditioned relatedness scorer.
//
// For every box feature v_i (rows of V) and word features w_j (rows of W):
//
//   va_i   = attn_mlp(v_i)
//   a_ij   = attn_fc([va_i; w_j])
//   alpha  = softmax over j of a_ij
//   q_i    = sum_j alpha_ij w_j
//   vb_i   = fusion_mlp(v_i)
//   m_i    = (vb_i * q_i) / sqrt(|vb_i * q_i|^2 + 1e-12)
//   r_i    = sigmoid(score_fc(m_i))
//
// Both MLPs use a ReLU between their two layers and hidden width q.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qanms/execution.hpp"
#include "qanms/matrix.hpp"
#include "qanms/params.hpp"

namespace qanms {

inline constexpr double kNormEpsilon = 1e-12;

/// Attention logits and weights are |B| x |Q|; pooled queries |B| x q.
struct AttentionState {
  Matrix logits;
  Matrix weights;
  Matrix pooled;
};

struct ScoreOutput {
  Matrix fused;                     ///< m_i rows, |B| x q
  std::vector<double> logit;        ///< pre-sigmoid score per box
  std::vector<double> relatedness;  ///< r_i in (0, 1)
};

/// Intermediates kept for the backward pass.
struct ForwardCache {
  Matrix attn_hidden_pre;    ///< |B| x q, before ReLU
  Matrix attn_projected;     ///< va, |B| x q
  Matrix fusion_hidden_pre;  ///< |B| x q
  Matrix fusion_projected;   ///< vb, |B| x q
  Matrix product;            ///< vb * q, |B| x q
  std::vector<double> norm;  ///< sqrt(|product|^2 + eps) per box
};

struct ForwardResult {
  AttentionState attention;
  ScoreOutput scores;
  ForwardCache cache;
};

/// Scores every box against the query. Boxes are independent, so the
/// parallel policy splits them across OpenMP threads and yields results
/// bit-identical to the serial one.
///
/// Throws DimensionError on shape mismatch, NumericalError naming the first
/// box whose intermediates are non-finite.
ForwardResult forward(const ScorerParams& params, const Matrix& visual,
                      const Matrix& words,
                      Execution exec = Execution::kParallel);

/// Convenience: relatedness scores only.
std::vector<double> relatedness(const ScorerParams& params,
                                const Matrix& visual, const Matrix& words,
                                Execution exec = Execution::kParallel);

/// Exact gradient of sum_i upstream[i] * r_i with respect to every
/// parameter, given the forward pass on the same inputs. Boxes are reduced
/// in index order.
ScorerParams backward(const ScorerParams& params, const Matrix& visual,
                      const Matrix& words, const ForwardResult& fwd,
                      std::span<const double> upstream);

}  // namespace qanms
