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

#include "protoclass/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "protoclass/proto.hpp"

namespace protoclass {

std::size_t TrainConfig::resolved_swa_start() const {
  if (swa_start_episode) return *swa_start_episode;
  return episodes > 100 ? episodes - 100 : 0;
}

void TrainConfig::validate() const {
  episode.validate();
  if (!(base_lr > 0.0) || !(swa_lr > 0.0)) throw Error("learning rates must be positive");
  if (resolved_swa_start() > episodes) {
    throw Error("swa_start_episode " + std::to_string(resolved_swa_start()) + " exceeds episode count " +
                std::to_string(episodes));
  }
}

void check_gradients(std::span<const double> grads, std::span<const ParamBlock> blocks) {
  for (const auto& block : blocks) {
    for (std::size_t i = 0; i < block.size; ++i) {
      if (!std::isfinite(grads[block.offset + i])) {
        throw NumericError("non-finite gradient in parameter block " + std::string(block.name) + " at index " +
                           std::to_string(i));
      }
    }
  }
}

void adam_step(OptimizerState& state, const AdamConfig& config, std::span<double> params,
               std::span<const double> grads, double lr, std::span<const ParamBlock> blocks) {
  if (params.size() != grads.size()) throw DimensionError("parameter and gradient sizes differ");
  check_gradients(grads, blocks);
  if (state.first_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void sgd_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr,
              std::span<const ParamBlock> blocks) {
  if (params.size() != grads.size()) throw DimensionError("parameter and gradient sizes differ");
  check_gradients(grads, blocks);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void swa_accumulate(SwaState& state, std::span<const double> params) {
  if (state.snapshot_count == 0) {
    state.average.assign(params.begin(), params.end());
    state.snapshot_count = 1;
    return;
  }
  if (state.average.size() != params.size()) throw DimensionError("SWA average does not match parameters");
  const double n1 = static_cast<double>(state.snapshot_count + 1);
  for (std::size_t i = 0; i < params.size(); ++i) state.average[i] += (params[i] - state.average[i]) / n1;
  ++state.snapshot_count;
}

void write_train_log_csv(const TrainLog& log, std::ostream& out) {
  out << "episode,loss,lr,episode_accuracy\n";
  out << std::setprecision(17);
  for (const auto& e : log) out << e.episode << ',' << e.loss << ',' << e.lr << ',' << e.accuracy << '\n';
}

TrainResult train(const EmbeddingStore& store, const TrainConfig& config, const ProjectionHead& initial_head,
                  const std::function<void(const Checkpoint&)>& on_checkpoint) {
  config.validate();
  TrainResult result{initial_head, {}, {}, {}};
  if (config.episodes == 0) return result;

  const auto eligible = eligible_classes(store, config.episode);
  if (eligible.size() < config.episode.ways) throw InsufficientClassesError(config.episode.ways, eligible.size());

  const std::size_t swa_start = config.resolved_swa_start();
  auto& head = result.head;
  const auto blocks = head.blocks();
  result.log.reserve(config.episodes);

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    const double lr = ep < swa_start ? config.base_lr : config.swa_lr;
    const auto episode = sample_episode(store, config.episode, eligible, ep);
    const auto loss = episode_loss_and_grads(head, episode, store, config.normalize_inputs);
    if (!std::isfinite(loss.loss)) throw NumericError("non-finite loss at episode " + std::to_string(ep));

    if (config.optimizer == OptimizerKind::Adam) {
      adam_step(result.optimizer, config.adam, head.params(), loss.gradients, lr, blocks);
    } else {
      sgd_step(result.optimizer, head.params(), loss.gradients, lr, blocks);
    }
    if (ep >= swa_start) swa_accumulate(result.swa, head.params());
    result.log.push_back({ep, loss.loss, lr, loss.accuracy});

    if (on_checkpoint && config.checkpoint_every > 0 && (ep + 1) % config.checkpoint_every == 0) {
      on_checkpoint(Checkpoint{ep + 1, head, result.swa.snapshot_count});
    }
  }

  if (result.swa.snapshot_count > 0) {
    auto params = head.params();
    std::copy(result.swa.average.begin(), result.swa.average.end(), params.begin());
  }
  return result;
}

}  // namespace protoclass
