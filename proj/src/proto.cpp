// Copyright 2026 The protoclass Authors
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

#include "protoclass/proto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace protoclass {

namespace {

struct SoftmaxTerms {
  std::vector<double> probabilities;
  // -log p for each class, computed without forming p directly.
  std::vector<double> neg_log_prob;
};

SoftmaxTerms softmax_neg(std::span<const double> dists) {
  const std::size_t k = dists.size();
  SoftmaxTerms out{std::vector<double>(k), std::vector<double>(k)};
  if (k == 0) return out;
  const auto min_it = std::min_element(dists.begin(), dists.end());
  const double shift = *min_it;
  const auto argmin = static_cast<std::size_t>(min_it - dists.begin());
  double rest = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (j != argmin) rest += std::exp(-(dists[j] - shift));
  }
  const double log_norm = std::log1p(rest);
  const double norm = 1.0 + rest;
  for (std::size_t j = 0; j < k; ++j) {
    const double z = dists[j] - shift;
    out.probabilities[j] = (j == argmin ? 1.0 : std::exp(-z)) / norm;
    out.neg_log_prob[j] = z + log_norm;
  }
  return out;
}

struct EmbeddedEpisode {
  std::vector<std::vector<double>> support_inputs;
  std::vector<std::vector<double>> query_inputs;
  std::vector<std::vector<double>> support_out;
  std::vector<std::vector<double>> query_out;
  std::vector<std::vector<double>> prototypes;
};

EmbeddedEpisode embed_episode(const ProjectionHead& head, const Episode& episode, const EmbeddingStore& store,
                              bool normalize_inputs) {
  if (store.dimension() != head.input_dim()) {
    throw DimensionError("store dimension " + std::to_string(store.dimension()) + " does not match head input " +
                         std::to_string(head.input_dim()));
  }
  if (episode.support.size() != episode.ways() * episode.shots ||
      episode.query.size() != episode.ways() * episode.queries || episode.shots == 0 || episode.queries == 0) {
    throw Error("episode support/query sizes do not match its ways/shots/queries");
  }
  EmbeddedEpisode e;
  for (std::size_t pos : episode.support) {
    e.support_inputs.push_back(embedding_input(store, pos, normalize_inputs));
    e.support_out.push_back(head.forward(e.support_inputs.back()));
  }
  for (std::size_t pos : episode.query) {
    e.query_inputs.push_back(embedding_input(store, pos, normalize_inputs));
    e.query_out.push_back(head.forward(e.query_inputs.back()));
  }
  const std::size_t shots = episode.shots;
  for (std::size_t k = 0; k < episode.ways(); ++k) {
    std::span<const std::vector<double>> support(e.support_out.data() + k * shots, shots);
    e.prototypes.push_back(compute_prototype(support));
  }
  return e;
}

}  // namespace

std::vector<double> compute_prototype(std::span<const std::vector<double>> support) {
  if (support.empty()) throw Error("cannot compute a prototype from an empty support set");
  const std::size_t dim = support.front().size();
  std::vector<double> sum(dim, 0.0);
  for (const auto& v : support) {
    if (v.size() != dim) throw DimensionError("support vectors have unequal lengths");
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  const double n = static_cast<double>(support.size());
  for (double& x : sum) x /= n;
  return sum;
}

double sq_euclidean(std::span<const double> x, std::span<const double> c) {
  if (x.size() != c.size()) {
    throw DimensionError("distance between vectors of length " + std::to_string(x.size()) + " and " +
                         std::to_string(c.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - c[i];
    acc += d * d;
  }
  return acc;
}

std::vector<double> class_posteriors(std::span<const double> dists) { return softmax_neg(dists).probabilities; }

std::vector<double> embedding_input(const EmbeddingStore& store, std::size_t position, bool normalize) {
  const auto& v = store.record(position).vector;
  std::vector<double> x(v.begin(), v.end());
  if (normalize) return l2_normalize(std::span<const double>(x));
  return x;
}

double episode_loss(const ProjectionHead& head, const Episode& episode, const EmbeddingStore& store,
                    bool normalize_inputs) {
  const auto e = embed_episode(head, episode, store, normalize_inputs);
  const std::size_t ways = episode.ways();
  double total = 0.0;
  std::vector<double> dists(ways);
  for (std::size_t q = 0; q < e.query_out.size(); ++q) {
    const std::size_t truth = q / episode.queries;
    for (std::size_t k = 0; k < ways; ++k) dists[k] = sq_euclidean(e.query_out[q], e.prototypes[k]);
    total += softmax_neg(dists).neg_log_prob[truth];
  }
  return total / static_cast<double>(e.query_out.size());
}

LossResult episode_loss_and_grads(const ProjectionHead& head, const Episode& episode, const EmbeddingStore& store,
                                  bool normalize_inputs) {
  const auto e = embed_episode(head, episode, store, normalize_inputs);
  const std::size_t ways = episode.ways();
  const std::size_t out_dim = head.output_dim();
  const std::size_t num_queries = e.query_out.size();
  const double inv_queries = 1.0 / static_cast<double>(num_queries);

  LossResult result;
  result.gradients.assign(head.param_count(), 0.0);
  result.probabilities.reserve(num_queries);

  // d(loss)/d(prototype k), accumulated over all queries.
  std::vector<std::vector<double>> grad_proto(ways, std::vector<double>(out_dim, 0.0));
  std::vector<double> dists(ways);
  std::vector<double> grad_query(out_dim);
  std::size_t correct = 0;

  for (std::size_t q = 0; q < num_queries; ++q) {
    const std::size_t truth = q / episode.queries;
    const auto& u = e.query_out[q];
    for (std::size_t k = 0; k < ways; ++k) dists[k] = sq_euclidean(u, e.prototypes[k]);
    auto sm = softmax_neg(dists);
    result.loss += sm.neg_log_prob[truth] * inv_queries;

    const auto best = static_cast<std::size_t>(
        std::max_element(sm.probabilities.begin(), sm.probabilities.end()) - sm.probabilities.begin());
    if (best == truth) ++correct;

    // -log p_y = d_y + log sum exp(-d_j)  =>  d/d d_k = [k == y] - p_k.
    std::fill(grad_query.begin(), grad_query.end(), 0.0);
    for (std::size_t k = 0; k < ways; ++k) {
      const double a = ((k == truth ? 1.0 : 0.0) - sm.probabilities[k]) * inv_queries;
      const auto& c = e.prototypes[k];
      for (std::size_t i = 0; i < out_dim; ++i) {
        const double g = 2.0 * a * (u[i] - c[i]);
        grad_query[i] += g;
        grad_proto[k][i] -= g;
      }
    }
    head.accumulate_gradient(e.query_inputs[q], grad_query, result.gradients);
    result.probabilities.push_back(std::move(sm.probabilities));
  }

  // Each support output enters its prototype with weight 1/S.
  const double inv_shots = 1.0 / static_cast<double>(episode.shots);
  std::vector<double> grad_support(out_dim);
  for (std::size_t s = 0; s < e.support_out.size(); ++s) {
    const auto& gp = grad_proto[s / episode.shots];
    for (std::size_t i = 0; i < out_dim; ++i) grad_support[i] = gp[i] * inv_shots;
    head.accumulate_gradient(e.support_inputs[s], grad_support, result.gradients);
  }

  result.accuracy = static_cast<double>(correct) * inv_queries;
  return result;
}

}  // namespace protoclass
