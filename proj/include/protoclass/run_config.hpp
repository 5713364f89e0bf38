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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "protoclass/inference.hpp"
#include "protoclass/synth.hpp"
#include "protoclass/trainer.hpp"

namespace protoclass {

/// 64-bit FNV-1a. Stable across platforms, used for config and file digests.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(std::string_view text);
/// 16 lowercase hex digits.
std::string hex_digest(std::uint64_t value);
std::string file_digest(const std::filesystem::path& path);

nlohmann::json to_json(const EpisodeConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const SynthConfig& config);
nlohmann::json to_json(const EvalOptions& options);

/// Semantic description of one command invocation. Output paths are not
/// part of it; inputs are identified by content digest, so the same inputs
/// and parameters always give the same digest.
class RunConfig {
 public:
  RunConfig(std::string command, nlohmann::json params);

  void add_input(const std::string& role, const std::filesystem::path& path);

  const nlohmann::json& document() const noexcept { return doc_; }
  /// Canonical serialization: sorted keys, no whitespace.
  std::string canonical() const { return doc_.dump(); }
  std::string digest() const { return hex_digest(fnv1a64(canonical())); }

 private:
  nlohmann::json doc_;
};

}  // namespace protoclass
