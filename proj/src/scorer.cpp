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

#include "qanms/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qanms/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qanms {

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// y = W x + b
void affine(const Dense& d, std::span<const double> x, std::span<double> y) {
  for (std::size_t o = 0; o < d.out_dim(); ++o) {
    y[o] = dot(d.weight.row(o), x) + d.bias[o];
  }
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_shapes(const ScorerParams& p, const Matrix& visual,
                  const Matrix& words) {
  if (visual.rows() > 0 && visual.cols() != p.visual_dim) {
    throw DimensionError("visual features have dimension " +
                         std::to_string(visual.cols()) + ", scorer expects " +
                         std::to_string(p.visual_dim));
  }
  if (words.rows() == 0) throw DimensionError("query has no words");
  if (words.cols() != p.word_dim) {
    throw DimensionError("word features have dimension " +
                         std::to_string(words.cols()) + ", scorer expects " +
                         std::to_string(p.word_dim));
  }
}

// Scores box i into row i of every output. Returns false on non-finite
// intermediates.
bool score_box(const ScorerParams& p, const Matrix& visual, const Matrix& words,
               std::size_t i, ForwardResult& out, std::span<double> hidden) {
  const std::size_t q = p.word_dim;
  const std::size_t nw = words.rows();
  auto& c = out.cache;
  auto& att = out.attention;
  const auto v = visual.row(i);

  // Attention projection.
  affine(p.attn_mlp.hidden, v, c.attn_hidden_pre.row(i));
  for (std::size_t k = 0; k < q; ++k) hidden[k] = std::max(0.0, c.attn_hidden_pre(i, k));
  affine(p.attn_mlp.out, hidden, c.attn_projected.row(i));

  // Logits over the concatenation [va; w_j].
  const auto attn_w = p.attn_fc.weight.row(0);
  const double box_term = dot(attn_w.first(q), c.attn_projected.row(i));
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nw; ++j) {
    const double a = box_term + dot(attn_w.last(q), words.row(j)) + p.attn_fc.bias[0];
    att.logits(i, j) = a;
    max_logit = std::max(max_logit, a);
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < nw; ++j) {
    const double e = std::exp(att.logits(i, j) - max_logit);
    att.weights(i, j) = e;
    denom += e;
  }
  auto pooled = att.pooled.row(i);
  std::fill(pooled.begin(), pooled.end(), 0.0);
  for (std::size_t j = 0; j < nw; ++j) {
    const double a = att.weights(i, j) / denom;
    att.weights(i, j) = a;
    const auto w = words.row(j);
    for (std::size_t k = 0; k < q; ++k) pooled[k] += a * w[k];
  }

  // Fusion branch.
  affine(p.fusion_mlp.hidden, v, c.fusion_hidden_pre.row(i));
  for (std::size_t k = 0; k < q; ++k) hidden[k] = std::max(0.0, c.fusion_hidden_pre(i, k));
  affine(p.fusion_mlp.out, hidden, c.fusion_projected.row(i));

  double sq = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    const double x = c.fusion_projected(i, k) * pooled[k];
    c.product(i, k) = x;
    sq += x * x;
  }
  const double norm = std::sqrt(sq + kNormEpsilon);
  c.norm[i] = norm;
  auto m = out.scores.fused.row(i);
  for (std::size_t k = 0; k < q; ++k) m[k] = c.product(i, k) / norm;

  const double logit = dot(p.score_fc.weight.row(0), m) + p.score_fc.bias[0];
  out.scores.logit[i] = logit;
  out.scores.relatedness[i] = sigmoid(logit);
  // ReLU maps NaN to 0, so pre-activations are checked explicitly.
  bool finite = std::isfinite(logit) && std::isfinite(max_logit) && std::isfinite(norm);
  for (std::size_t k = 0; k < q; ++k) {
    finite = finite && std::isfinite(c.attn_hidden_pre(i, k)) &&
             std::isfinite(c.fusion_hidden_pre(i, k));
  }
  return finite;
}

}  // namespace

ForwardResult forward(const ScorerParams& params, const Matrix& visual,
                      const Matrix& words, Execution exec) {
  check_shapes(params, visual, words);
  const std::size_t nb = visual.rows();
  const std::size_t nw = words.rows();
  const std::size_t q = params.word_dim;

  ForwardResult out;
  out.attention = {Matrix(nb, nw), Matrix(nb, nw), Matrix(nb, q)};
  out.scores = {Matrix(nb, q), std::vector<double>(nb), std::vector<double>(nb)};
  out.cache = {Matrix(nb, q), Matrix(nb, q), Matrix(nb, q),
               Matrix(nb, q), Matrix(nb, q), std::vector<double>(nb)};

  std::vector<char> ok(nb, 1);
  const auto n = static_cast<std::ptrdiff_t>(nb);
  if (exec == Execution::kParallel) {
#pragma omp parallel
    {
      std::vector<double> hidden(q);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        ok[i] = score_box(params, visual, words, static_cast<std::size_t>(i), out, hidden);
      }
    }
  } else {
    std::vector<double> hidden(q);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      ok[i] = score_box(params, visual, words, static_cast<std::size_t>(i), out, hidden);
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (!ok[i]) throw NumericalError("non-finite relatedness intermediate at box " + std::to_string(i));
  }
  return out;
}

std::vector<double> relatedness(const ScorerParams& params, const Matrix& visual,
                                const Matrix& words, Execution exec) {
  return forward(params, visual, words, exec).scores.relatedness;
}

namespace {

// Accumulates gradients of a Dense layer given its input x and the gradient
// dy at its output; writes dx when non-empty.
void affine_backward(const Dense& d, std::span<const double> x,
                     std::span<const double> dy, Dense& grad,
                     std::span<double> dx) {
  for (std::size_t o = 0; o < d.out_dim(); ++o) {
    if (dy[o] == 0.0) continue;
    auto gw = grad.weight.row(o);
    for (std::size_t k = 0; k < x.size(); ++k) gw[k] += dy[o] * x[k];
    grad.bias[o] += dy[o];
  }
  if (!dx.empty()) {
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t o = 0; o < d.out_dim(); ++o) {
      const auto w = d.weight.row(o);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += w[k] * dy[o];
    }
  }
}

void mlp_backward(const Mlp& mlp, std::span<const double> input,
                  std::span<const double> hidden_pre, std::span<const double> dout,
                  Mlp& grad, std::vector<double>& hidden, std::vector<double>& dhidden) {
  const std::size_t width = hidden_pre.size();
  for (std::size_t k = 0; k < width; ++k) hidden[k] = std::max(0.0, hidden_pre[k]);
  affine_backward(mlp.out, hidden, dout, grad.out, dhidden);
  for (std::size_t k = 0; k < width; ++k) {
    if (hidden_pre[k] <= 0.0) dhidden[k] = 0.0;
  }
  affine_backward(mlp.hidden, input, dhidden, grad.hidden, {});
}

}  // namespace

ScorerParams backward(const ScorerParams& params, const Matrix& visual,
                      const Matrix& words, const ForwardResult& fwd,
                      std::span<const double> upstream) {
  const std::size_t nb = visual.rows();
  const std::size_t nw = words.rows();
  const std::size_t q = params.word_dim;
  if (upstream.size() != nb) {
    throw DimensionError("upstream gradient has " + std::to_string(upstream.size()) +
                         " entries for " + std::to_string(nb) + " boxes");
  }
  ScorerParams grad = params.zeros_like();
  const auto& c = fwd.cache;
  const auto& att = fwd.attention;
  const auto attn_w = params.attn_fc.weight.row(0);
  auto attn_gw = grad.attn_fc.weight.row(0);
  auto score_gw = grad.score_fc.weight.row(0);

  std::vector<double> dm(q), dx(q), dvb(q), dpooled(q), dalpha(nw), dlogit(nw),
      dva(q), hidden(q), dhidden(q);

  for (std::size_t i = 0; i < nb; ++i) {
    if (upstream[i] == 0.0) continue;
    const double r = fwd.scores.relatedness[i];
    const double dr_hat = upstream[i] * r * (1.0 - r);
    const auto m = fwd.scores.fused.row(i);

    // score_fc
    for (std::size_t k = 0; k < q; ++k) {
      score_gw[k] += dr_hat * m[k];
      dm[k] = dr_hat * params.score_fc.weight(0, k);
    }
    grad.score_fc.bias[0] += dr_hat;

    // L2 normalization: dx = (dm - m (m . dm)) / norm
    const double mdm = dot(m, dm);
    for (std::size_t k = 0; k < q; ++k) dx[k] = (dm[k] - m[k] * mdm) / c.norm[i];

    // Elementwise product.
    const auto pooled = att.pooled.row(i);
    for (std::size_t k = 0; k < q; ++k) {
      dvb[k] = dx[k] * pooled[k];
      dpooled[k] = dx[k] * c.fusion_projected(i, k);
    }
    mlp_backward(params.fusion_mlp, visual.row(i), c.fusion_hidden_pre.row(i), dvb,
                 grad.fusion_mlp, hidden, dhidden);

    // Weighted sum and softmax.
    double weighted = 0.0;
    for (std::size_t j = 0; j < nw; ++j) {
      dalpha[j] = dot(dpooled, words.row(j));
      weighted += att.weights(i, j) * dalpha[j];
    }
    double dlogit_sum = 0.0;
    for (std::size_t j = 0; j < nw; ++j) {
      dlogit[j] = att.weights(i, j) * (dalpha[j] - weighted);
      dlogit_sum += dlogit[j];
    }

    // attn_fc over [va; w_j].
    const auto va = c.attn_projected.row(i);
    for (std::size_t k = 0; k < q; ++k) {
      attn_gw[k] += dlogit_sum * va[k];
      dva[k] = dlogit_sum * attn_w[k];
    }
    for (std::size_t j = 0; j < nw; ++j) {
      const auto w = words.row(j);
      for (std::size_t k = 0; k < q; ++k) attn_gw[q + k] += dlogit[j] * w[k];
    }
    grad.attn_fc.bias[0] += dlogit_sum;

    mlp_backward(params.attn_mlp, visual.row(i), c.attn_hidden_pre.row(i), dva,
                 grad.attn_mlp, hidden, dhidden);
  }
  return grad;
}

}  // namespace qanms
