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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "protoclass/episode.hpp"
#include "protoclass/head.hpp"
#include "protoclass/store.hpp"

namespace protoclass {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  std::size_t episodes = 750;
  EpisodeConfig episode{};
  double base_lr = 1e-5;
  double swa_lr = 5e-5;
  /// Defaults to max(episodes - 100, 0) when unset.
  std::optional<std::size_t> swa_start_episode;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamConfig adam{};
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  bool normalize_inputs = true;

  std::size_t resolved_swa_start() const;
  /// Throws Error if swa_start > episodes or a learning rate is not positive.
  void validate() const;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

/// Throws NumericError naming the first block with a non-finite gradient.
void check_gradients(std::span<const double> grads, std::span<const ParamBlock> blocks);

/// Bias-corrected Adam update. Moments are sized on first use.
void adam_step(OptimizerState& state, const AdamConfig& config, std::span<double> params,
               std::span<const double> grads, double lr, std::span<const ParamBlock> blocks);

/// Plain gradient descent: params -= lr * grads.
void sgd_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr,
              std::span<const ParamBlock> blocks);

struct SwaState {
  std::vector<double> average;
  std::uint64_t snapshot_count = 0;
};

/// average <- average + (params - average) / (n + 1).
void swa_accumulate(SwaState& state, std::span<const double> params);

struct TrainLogEntry {
  std::size_t episode = 0;
  double loss = 0.0;
  double lr = 0.0;
  double accuracy = 0.0;

  bool operator==(const TrainLogEntry&) const = default;
};

using TrainLog = std::vector<TrainLogEntry>;

/// CSV with header `episode,loss,lr,episode_accuracy`; floats printed with
/// 17 significant digits so the file is a lossless record.
void write_train_log_csv(const TrainLog& log, std::ostream& out);

struct Checkpoint {
  /// Number of completed episodes.
  std::size_t episode = 0;
  /// Current optimizer parameters (not the SWA average).
  const ProjectionHead& head;
  std::uint64_t snapshot_count = 0;
};

struct TrainResult {
  ProjectionHead head;
  TrainLog log;
  SwaState swa;
  OptimizerState optimizer;
};

/// Episodic training. Learning rate is base_lr before the SWA start episode
/// and swa_lr from it on; parameters after each step at or past the start
/// are averaged, and the average becomes the returned head.
/// Throws InsufficientClassesError, or NumericError naming the episode whose
/// loss was not finite.
TrainResult train(const EmbeddingStore& store, const TrainConfig& config, const ProjectionHead& initial_head,
                  const std::function<void(const Checkpoint&)>& on_checkpoint = {});

}  // namespace protoclass
