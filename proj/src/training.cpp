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

#include "qanms/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qanms/errors.hpp"
#include "qanms/rng.hpp"
#include "qanms/scorer.hpp"

namespace qanms {

std::string_view to_string(LossKind k) {
  return k == LossKind::kBinaryXe ? "binary_xe" : "ranking";
}

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "binary_xe" || s == "xe") return LossKind::kBinaryXe;
  if (s == "ranking") return LossKind::kRanking;
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

double clamp_probability(double r) {
  return std::clamp(r, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double binary_xe(std::span<const double> r, std::span<const int> labels) {
  check_lengths(r.size(), labels.size(), "binary_xe");
  if (r.empty()) throw std::invalid_argument("binary_xe: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double p = clamp_probability(r[i]);
    sum += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<double>(r.size());
}

std::vector<double> binary_xe_grad(std::span<const double> r,
                                   std::span<const int> labels) {
  check_lengths(r.size(), labels.size(), "binary_xe_grad");
  if (r.empty()) throw std::invalid_argument("binary_xe_grad: empty input");
  const double scale = 1.0 / static_cast<double>(r.size());
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < kProbabilityClamp || r[i] > 1.0 - kProbabilityClamp) continue;
    g[i] = labels[i] ? -scale / r[i] : scale / (1.0 - r[i]);
  }
  return g;
}

double ranking_loss(std::span<const RankPair> pairs, std::span<const double> r,
                    double alpha) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::max(0.0, r[p.neg] - r[p.pos] + alpha);
  return sum / static_cast<double>(pairs.size());
}

std::vector<double> ranking_loss_grad(std::span<const RankPair> pairs,
                                      std::span<const double> r, double alpha) {
  std::vector<double> g(r.size(), 0.0);
  if (pairs.empty()) return g;
  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    if (r[p.neg] - r[p.pos] + alpha > 0.0) {
      g[p.neg] += scale;
      g[p.pos] -= scale;
    }
  }
  return g;
}

std::vector<RankPair> sample_pairs(std::span<const BoxTarget> targets,
                                   std::span<const double> r, std::size_t top_h,
                                   std::uint64_t seed) {
  check_lengths(targets.size(), r.size(), "sample_pairs");
  const std::size_t n = targets.size();

  // Seeded tie-break rank for every box.
  std::vector<std::size_t> tie_rank(n);
  std::iota(tie_rank.begin(), tie_rank.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(tie_rank);

  std::vector<std::size_t> by_score(n);
  std::iota(by_score.begin(), by_score.end(), std::size_t{0});
  std::sort(by_score.begin(), by_score.end(), [&](std::size_t a, std::size_t b) {
    if (r[a] != r[b]) return r[a] > r[b];
    return tie_rank[a] < tie_rank[b];
  });

  std::vector<RankPair> pairs;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (!(targets[pos].rho > 0.5)) continue;
    std::size_t taken = 0;
    for (std::size_t neg : by_score) {
      if (taken == top_h) break;
      if (targets[neg].q_value < targets[pos].q_value) {
        pairs.push_back({neg, pos});
        ++taken;
      }
    }
  }
  return pairs;
}

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("ranking margin alpha must be positive");
  if (top_h < 1) throw ConfigError("top_h must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

// ---------------------------------------------------------------- Adam

Adam::Adam(const ScorerParams& shape, double lr, double beta1, double beta2,
           double epsilon)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(shape.zeros_like()),
      v_(shape.zeros_like()) {}

void Adam::step(ScorerParams& params, const ScorerParams& grad, bool freeze_score_fc) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  // Walk the four parameter sets in lockstep; for_each_tensor visits them
  // in the same order.
  std::vector<std::span<double>> g_spans, m_spans, v_spans;
  const_cast<ScorerParams&>(grad).for_each_tensor(
      [&](const std::string&, std::span<double> s, std::size_t) { g_spans.push_back(s); });
  m_.for_each_tensor(
      [&](const std::string&, std::span<double> s, std::size_t) { m_spans.push_back(s); });
  v_.for_each_tensor(
      [&](const std::string&, std::span<double> s, std::size_t) { v_spans.push_back(s); });

  std::size_t t = 0;
  params.for_each_tensor([&](const std::string& name, std::span<double> p, std::size_t) {
    const std::size_t idx = t++;
    if (freeze_score_fc && name.starts_with("score_fc")) return;
    auto g = g_spans[idx];
    auto m = m_spans[idx];
    auto v = v_spans[idx];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  });
}

// ---------------------------------------------------------------- training

namespace {

std::vector<int> labels_of(const TrainSample& s) {
  std::vector<int> labels;
  labels.reserve(s.targets.size());
  for (const auto& t : s.targets) labels.push_back(t.label);
  return labels;
}

void add_into(ScorerParams& acc, const ScorerParams& g, double scale) {
  std::vector<std::span<double>> src;
  const_cast<ScorerParams&>(g).for_each_tensor(
      [&](const std::string&, std::span<double> s, std::size_t) { src.push_back(s); });
  std::size_t t = 0;
  acc.for_each_tensor([&](const std::string&, std::span<double> dst, std::size_t) {
    const auto s = src[t++];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * s[k];
  });
}

std::uint64_t pair_seed(std::uint64_t seed, std::size_t epoch, std::size_t sample) {
  return mix(mix(seed ^ 0x5ca1ab1eULL) ^ mix(epoch) ^ mix(sample + 0x1000003ULL));
}

}  // namespace

SampleGradient sample_gradient(const ScorerParams& params, const TrainSample& sample,
                               LossKind loss, double alpha,
                               std::span<const RankPair> pairs) {
  if (sample.targets.size() != sample.visual.rows()) {
    throw DimensionError("sample has " + std::to_string(sample.visual.rows()) +
                         " boxes but " + std::to_string(sample.targets.size()) + " targets");
  }
  SampleGradient out;
  if (sample.visual.rows() == 0 || (loss == LossKind::kRanking && pairs.empty())) {
    out.contributes = false;
    out.grad = params.zeros_like();
    return out;
  }
  const auto fwd = forward(params, sample.visual, sample.words, Execution::kSerial);
  const auto& r = fwd.scores.relatedness;
  std::vector<double> upstream;
  if (loss == LossKind::kBinaryXe) {
    const auto labels = labels_of(sample);
    out.loss = binary_xe(r, labels);
    upstream = binary_xe_grad(r, labels);
  } else {
    out.loss = ranking_loss(pairs, r, alpha);
    upstream = ranking_loss_grad(pairs, r, alpha);
  }
  out.grad = backward(params, sample.visual, sample.words, fwd, upstream);
  return out;
}

double sample_loss(const ScorerParams& params, const TrainSample& sample,
                   LossKind loss, double alpha, std::span<const RankPair> pairs) {
  const auto r = relatedness(params, sample.visual, sample.words, Execution::kSerial);
  if (loss == LossKind::kBinaryXe) return binary_xe(r, labels_of(sample));
  return ranking_loss(pairs, r, alpha);
}

TrainResult train(std::span<const TrainSample> samples, const TrainConfig& config,
                  std::optional<ScorerParams> init) {
  config.validate();
  if (samples.empty()) throw DataError("training set is empty");
  const std::size_t v = samples.front().visual.cols();
  const std::size_t q = samples.front().words.cols();
  for (const auto& s : samples) {
    if ((s.visual.rows() > 0 && s.visual.cols() != v) || s.words.cols() != q) {
      throw DimensionError("training samples have inconsistent feature dimensions");
    }
  }

  TrainResult result;
  result.params = init ? std::move(*init) : ScorerParams::initialize(v, q, config.seed);
  if (result.params.visual_dim != v || result.params.word_dim != q) {
    throw DimensionError("initial parameters do not match the training data dimensions");
  }
  Adam adam(result.params, config.learning_rate, config.beta1, config.beta2,
            config.adam_epsilon);
  Rng shuffle_rng(mix(config.seed ^ 0xdeadbeefULL));

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<RankPair>> pairs(samples.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.loss == LossKind::kRanking) {
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto r = relatedness(result.params, samples[s].visual, samples[s].words);
        pairs[s] = sample_pairs(samples[s].targets, r, config.top_h,
                                pair_seed(config.seed, epoch, s));
      }
    }
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (std::size_t start = 0, batch = 0; start < order.size();
         start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto count = static_cast<std::ptrdiff_t>(end - start);
      std::vector<SampleGradient> parts(static_cast<std::size_t>(count));
      std::vector<std::string> errors(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < count; ++k) {
        const std::size_t s = order[start + static_cast<std::size_t>(k)];
        try {
          parts[k] = sample_gradient(result.params, samples[s], config.loss, config.alpha,
                                     pairs[s]);
        } catch (const std::exception& e) {
          errors[k] = e.what();
        }
      }
      for (const auto& e : errors) {
        if (!e.empty()) {
          throw NumericalError("epoch " + std::to_string(epoch) + " batch " +
                               std::to_string(batch) + ": " + e);
        }
      }

      std::size_t contributing = 0;
      for (const auto& p : parts) contributing += p.contributes ? 1 : 0;
      if (contributing == 0) continue;

      ScorerParams grad = result.params.zeros_like();
      double batch_loss = 0.0;
      const double scale = 1.0 / static_cast<double>(contributing);
      for (const auto& p : parts) {
        if (!p.contributes) continue;
        batch_loss += p.loss;
        add_into(grad, p.grad, scale);
      }
      batch_loss *= scale;
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(batch));
      }
      adam.step(result.params, grad, config.freeze_score_fc);
      loss_sum += batch_loss;
      ++loss_batches;
    }
    result.epoch_loss.push_back(loss_batches ? loss_sum / static_cast<double>(loss_batches)
                                             : 0.0);
  }
  result.params.check_finite();
  return result;
}

}  // namespace qanms
