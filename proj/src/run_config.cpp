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

#include "protoclass/run_config.hpp"

#include <cstdio>

#include "bytes.hpp"

namespace protoclass {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

std::string hex_digest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) { return hex_digest(fnv1a64(detail::read_file(path))); }

nlohmann::json to_json(const EpisodeConfig& config) {
  return {{"ways", config.ways},
          {"shots", config.shots},
          {"queries", config.queries},
          {"source_splits", config.source_splits.to_string()},
          {"seed", config.seed}};
}

nlohmann::json to_json(const TrainConfig& config) {
  nlohmann::json j = {{"episodes", config.episodes},
                      {"episode", to_json(config.episode)},
                      {"base_lr", config.base_lr},
                      {"swa_lr", config.swa_lr},
                      {"swa_start_episode", config.resolved_swa_start()},
                      {"optimizer", config.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                      {"checkpoint_every", config.checkpoint_every},
                      {"normalize_inputs", config.normalize_inputs}};
  if (config.optimizer == OptimizerKind::Adam) {
    j["adam"] = {{"beta1", config.adam.beta1}, {"beta2", config.adam.beta2}, {"epsilon", config.adam.epsilon}};
  }
  return j;
}

nlohmann::json to_json(const SynthConfig& config) {
  nlohmann::json law;
  if (const auto* u = std::get_if<UniformCount>(&config.count_law)) {
    law = {{"kind", "uniform"}, {"count", u->count}};
  } else {
    const auto& lt = std::get<LongTailCount>(config.count_law);
    law = {{"kind", "longtail"}, {"min", lt.min}, {"max", lt.max}};
  }
  return {{"num_classes", config.num_classes},
          {"dimension", config.dimension},
          {"count_law", law},
          {"sigma", config.sigma},
          {"val_fraction", config.val_fraction},
          {"test_per_class", config.test_per_class},
          {"seed", config.seed}};
}

nlohmann::json to_json(const EvalOptions& options) {
  return {{"method", options.method == Method::Prototype ? "proto" : "nn"},
          {"bank_splits", options.bank.splits.to_string()},
          {"normalize_inputs", options.bank.normalize_inputs},
          {"normalize_prototypes", options.bank.normalize_prototypes},
          {"test_split", std::string(split_name(options.test_split))},
          {"k", options.k_list},
          {"metric", options.metric == Metric::Cosine ? "cosine" : "sqeuclidean"}};
}

RunConfig::RunConfig(std::string command, nlohmann::json params)
    : doc_({{"command", std::move(command)}, {"params", std::move(params)}, {"inputs", nlohmann::json::object()}}) {}

void RunConfig::add_input(const std::string& role, const std::filesystem::path& path) {
  doc_["inputs"][role] = file_digest(path);
}

}  // namespace protoclass
