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
#include <string_view>
#include <vector>

#include "protoclass/error.hpp"

namespace protoclass {

enum class HeadArch : std::uint32_t { Affine = 0, Mlp = 1 };

/// Named slice of the flat parameter vector.
struct ParamBlock {
  std::string_view name;
  std::size_t offset;
  std::size_t size;
};

/// Trainable map applied on top of frozen embeddings.
///
/// Parameters live in one contiguous vector of doubles so optimizers and
/// averaging can treat them uniformly. Layout:
///   Affine: W (P x D, row-major), b (P)
///   Mlp:    W1 (H x D), b1 (H), W2 (P x H), b2 (P)
/// Forward: Affine y = Wx + b; Mlp y = W2 relu(W1 x + b1) + b2.
class ProjectionHead {
 public:
  /// Affine, P = D, W = I, b = 0.
  static ProjectionHead identity(std::size_t dim);
  /// Zero-initialized affine map.
  static ProjectionHead affine(std::size_t input_dim, std::size_t output_dim);
  /// Zero-initialized MLP.
  static ProjectionHead mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim);
  /// MLP with uniform(+-sqrt(6/(fan_in+fan_out))) weights and zero biases.
  static ProjectionHead mlp_random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                                   std::uint64_t seed);

  HeadArch arch() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  /// 0 for Affine.
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::vector<ParamBlock> blocks() const;

  std::vector<double> forward(std::span<const double> x) const;

  /// Adds d(loss)/d(params) to `grad_params` given x and d(loss)/d(output).
  void accumulate_gradient(std::span<const double> x, std::span<const double> grad_output,
                           std::span<double> grad_params) const;

  bool operator==(const ProjectionHead&) const = default;

 private:
  ProjectionHead(HeadArch arch, std::size_t in, std::size_t hidden, std::size_t out);

  HeadArch arch_;
  std::size_t input_dim_;
  std::size_t hidden_dim_;
  std::size_t output_dim_;
  std::vector<double> params_;
};

/// Checkpoint layout ("FSHD"):
///   "FSHD1\0" | u32 arch | u32 D | u32 P | u32 H | params as f64 LE in
///   ProjectionHead layout order.
inline constexpr std::size_t kHeadHeaderBytes = 6 + 4 * 4;

std::vector<unsigned char> encode_head(const ProjectionHead& head);
ProjectionHead decode_head(std::span<const unsigned char> bytes);
void save_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead load_head(const std::filesystem::path& path);

}  // namespace protoclass
