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
#include <vector>

#include "protoclass/store.hpp"

namespace protoclass {

struct EpisodeConfig {
  std::size_t ways = 75;
  std::size_t shots = 3;
  std::size_t queries = 1;
  SplitSet source_splits{Split::Train};
  std::uint64_t seed = 0;

  /// Throws Error unless ways >= 2, shots >= 1, queries >= 1 and the source
  /// split set is nonempty.
  void validate() const;
};

/// One K-way, S-shot, Q-query draw. `support` and `query` are row-major over
/// classes: entries [k*S, (k+1)*S) of `support` belong to `class_ids[k]`.
struct Episode {
  std::vector<std::uint32_t> class_ids;
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
  std::uint64_t episode_index = 0;
  std::size_t shots = 0;
  std::size_t queries = 0;

  std::size_t ways() const noexcept { return class_ids.size(); }
  bool operator==(const Episode&) const = default;
};

/// Labels with at least shots+queries records in the source splits, ascending.
std::vector<std::uint32_t> eligible_classes(const EmbeddingStore& store, const EpisodeConfig& config);

/// Uniformly samples `ways` eligible classes without replacement, then
/// shots+queries records per class without replacement. Depends only on
/// (store, config, episode_index). Throws InsufficientClassesError.
Episode sample_episode(const EmbeddingStore& store, const EpisodeConfig& config, std::uint64_t episode_index);

/// Same draw with the eligible list precomputed (the training loop reuses it).
Episode sample_episode(const EmbeddingStore& store, const EpisodeConfig& config,
                       std::span<const std::uint32_t> eligible, std::uint64_t episode_index);

}  // namespace protoclass
