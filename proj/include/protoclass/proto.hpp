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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoclass/episode.hpp"
#include "protoclass/head.hpp"
#include "protoclass/store.hpp"

namespace protoclass {

struct Prototype {
  std::uint32_t label_id = 0;
  std::vector<double> vector;
  std::size_t support_count = 0;
};

/// Componentwise mean of the support vectors. Throws Error on an empty list
/// and DimensionError on ragged input.
std::vector<double> compute_prototype(std::span<const std::vector<double>> support);

/// Sum of squared component differences.
double sq_euclidean(std::span<const double> x, std::span<const double> c);

/// softmax(-dists), shifted by the minimum distance before exponentiation.
std::vector<double> class_posteriors(std::span<const double> dists);

/// Store vector as doubles, L2-normalized when `normalize` is set.
std::vector<double> embedding_input(const EmbeddingStore& store, std::size_t position, bool normalize);

struct LossResult {
  /// Mean over all queries of -log p(true class).
  double loss = 0.0;
  /// One K-vector per query, in episode query order.
  std::vector<std::vector<double>> probabilities;
  /// d(loss)/d(params), laid out like ProjectionHead::params().
  std::vector<double> gradients;
  /// Fraction of queries whose most probable class is the true one.
  double accuracy = 0.0;
};

/// Prototypical loss for one episode together with its exact gradient.
/// Prototypes are means of head outputs over the support set, so the
/// gradient flows through support embeddings as well as queries.
LossResult episode_loss_and_grads(const ProjectionHead& head, const Episode& episode,
                                  const EmbeddingStore& store, bool normalize_inputs = true);

/// Loss only; same arithmetic as episode_loss_and_grads without the
/// backward pass.
double episode_loss(const ProjectionHead& head, const Episode& episode, const EmbeddingStore& store,
                    bool normalize_inputs = true);

}  // namespace protoclass
