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

#include "protoclass/episode.hpp"

#include <utility>

#include "protoclass/rng.hpp"

namespace protoclass {

namespace {

// First `take` entries of `items` become a uniform sample without
// replacement (partial Fisher-Yates).
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t take, Pcg32& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace

void EpisodeConfig::validate() const {
  if (ways < 2) throw Error("episode ways must be >= 2");
  if (shots < 1) throw Error("episode shots must be >= 1");
  if (queries < 1) throw Error("episode queries must be >= 1");
  if (source_splits.empty()) throw Error("episode source splits must be nonempty");
}

std::vector<std::uint32_t> eligible_classes(const EmbeddingStore& store, const EpisodeConfig& config) {
  const std::size_t needed = config.shots + config.queries;
  std::vector<std::uint32_t> out;
  for (const auto& [label, count] : class_counts(store, config.source_splits)) {
    if (count >= needed) out.push_back(label);
  }
  return out;
}

Episode sample_episode(const EmbeddingStore& store, const EpisodeConfig& config, std::uint64_t episode_index) {
  const auto eligible = eligible_classes(store, config);
  return sample_episode(store, config, eligible, episode_index);
}

Episode sample_episode(const EmbeddingStore& store, const EpisodeConfig& config,
                       std::span<const std::uint32_t> eligible, std::uint64_t episode_index) {
  config.validate();
  if (eligible.size() < config.ways) throw InsufficientClassesError(config.ways, eligible.size());

  auto rng = Pcg32::for_index(config.seed, episode_index);
  std::vector<std::uint32_t> classes(eligible.begin(), eligible.end());
  partial_shuffle(classes, config.ways, rng);
  classes.resize(config.ways);

  Episode ep;
  ep.class_ids = std::move(classes);
  ep.episode_index = episode_index;
  ep.shots = config.shots;
  ep.queries = config.queries;
  ep.support.reserve(config.ways * config.shots);
  ep.query.reserve(config.ways * config.queries);

  for (const auto label : ep.class_ids) {
    auto pool = store.positions(label, config.source_splits);
    partial_shuffle(pool, config.shots + config.queries, rng);
    ep.support.insert(ep.support.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.shots));
    ep.query.insert(ep.query.end(), pool.begin() + static_cast<std::ptrdiff_t>(config.shots),
                    pool.begin() + static_cast<std::ptrdiff_t>(config.shots + config.queries));
  }
  return ep;
}

}  // namespace protoclass
