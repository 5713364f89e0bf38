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

#include "protoclass/synth.hpp"

#include <cmath>
#include <string>

#include "protoclass/rng.hpp"

namespace protoclass {

namespace {

std::size_t draw_count(const CountLaw& law, Pcg32& rng) {
  if (const auto* u = std::get_if<UniformCount>(&law)) return u->count;
  const auto& lt = std::get<LongTailCount>(law);
  double total = 0.0;
  for (std::size_t n = lt.min; n <= lt.max; ++n) total += 1.0 / static_cast<double>(n);
  double target = rng.uniform_open_closed() * total;
  for (std::size_t n = lt.min; n < lt.max; ++n) {
    target -= 1.0 / static_cast<double>(n);
    if (target <= 0.0) return n;
  }
  return lt.max;
}

std::vector<double> gaussian_vector(std::size_t dim, Pcg32& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian();
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw Error("synthetic data needs at least 2 classes");
  if (dimension < 2) throw Error("synthetic data needs dimension >= 2");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("sigma must be finite and nonnegative");
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) throw Error("val_fraction must lie in [0, 1]");
  if (const auto* u = std::get_if<UniformCount>(&count_law)) {
    if (u->count < 1) throw Error("uniform count must be >= 1");
  } else {
    const auto& lt = std::get<LongTailCount>(count_law);
    if (lt.min < 1 || lt.max < lt.min) throw Error("long-tail bounds must satisfy 1 <= min <= max");
  }
}

EmbeddingStore generate(const SynthConfig& config) {
  config.validate();
  Pcg32 rng(config.seed, 0x53594E54ULL);
  const std::size_t dim = config.dimension;

  std::vector<std::vector<double>> means;
  means.reserve(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    for (;;) {
      auto g = gaussian_vector(dim, rng);
      double sq = 0.0;
      for (double x : g) sq += x * x;
      if (sq > 0.0) {
        means.push_back(l2_normalize(std::span<const double>(g)));
        break;
      }
    }
  }

  std::vector<EmbeddingRecord> records;
  LabelMap labels;
  auto emit = [&](std::size_t cls, Split split) {
    const auto& mean = means[cls];
    std::vector<double> sample(dim);
    for (;;) {
      for (std::size_t i = 0; i < dim; ++i) sample[i] = mean[i] + config.sigma * rng.gaussian();
      double sq = 0.0;
      for (double x : sample) sq += x * x;
      if (sq > 0.0) break;
    }
    const auto unit = l2_normalize(std::span<const double>(sample));
    EmbeddingRecord rec;
    rec.record_id = records.size();
    rec.label_id = static_cast<std::uint32_t>(cls);
    rec.split = split;
    rec.vector.assign(unit.begin(), unit.end());
    records.push_back(std::move(rec));
  };

  for (std::size_t c = 0; c < config.num_classes; ++c) {
    labels.emplace(static_cast<std::uint32_t>(c), "synthetic_species_" + std::to_string(c));
    const std::size_t train_count = draw_count(config.count_law, rng);
    const bool has_val = config.val_fraction > 0.0 && rng.uniform_open_closed() <= config.val_fraction;
    const std::size_t val_count = has_val ? draw_count(config.count_law, rng) : 0;
    for (std::size_t i = 0; i < train_count; ++i) emit(c, Split::Train);
    for (std::size_t i = 0; i < val_count; ++i) emit(c, Split::Val);
    for (std::size_t i = 0; i < config.test_per_class; ++i) emit(c, Split::Test);
  }
  return EmbeddingStore(dim, std::move(records), std::move(labels));
}

}  // namespace protoclass
