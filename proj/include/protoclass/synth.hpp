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
#include <variant>

#include "protoclass/store.hpp"

namespace protoclass {

/// Every class gets exactly `count` training records.
struct UniformCount {
  std::size_t count = 4;
};

/// Training counts in [min, max] with P(n) proportional to 1/n, so most
/// classes sit at the low end.
struct LongTailCount {
  std::size_t min = 1;
  std::size_t max = 4;
};

using CountLaw = std::variant<UniformCount, LongTailCount>;

struct SynthConfig {
  std::size_t num_classes = 100;
  std::size_t dimension = 64;
  CountLaw count_law = LongTailCount{};
  double sigma = 0.05;
  /// Probability that a class also receives validation records; their count
  /// is drawn from the same law as the training count.
  double val_fraction = 0.0;
  std::size_t test_per_class = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class means uniform on the unit sphere; each sample is
/// l2_normalize(mean + sigma * N(0, I)). Records are laid out class by class
/// (train, then val, then test), record_id = position, label_id = class
/// index, label names "synthetic_species_<id>".
EmbeddingStore generate(const SynthConfig& config);

}  // namespace protoclass
