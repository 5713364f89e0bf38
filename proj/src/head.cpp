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

#include "protoclass/head.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bytes.hpp"
#include "protoclass/rng.hpp"

namespace protoclass {

namespace {

constexpr std::array<unsigned char, 6> kHeadMagic = {'F', 'S', 'H', 'D', '1', '\0'};

std::size_t param_count_for(HeadArch arch, std::size_t in, std::size_t hidden, std::size_t out) {
  if (arch == HeadArch::Affine) return out * in + out;
  return hidden * in + hidden + out * hidden + out;
}

// y = M x + c with M rows x cols, row-major.
void affine_apply(std::span<const double> m, std::span<const double> c, std::span<const double> x,
                  std::span<double> y) {
  const std::size_t rows = y.size();
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = c[r];
    const double* row = m.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[r] = acc;
  }
}

}  // namespace

ProjectionHead::ProjectionHead(HeadArch arch, std::size_t in, std::size_t hidden, std::size_t out)
    : arch_(arch),
      input_dim_(in),
      hidden_dim_(arch == HeadArch::Affine ? 0 : hidden),
      output_dim_(out),
      params_(param_count_for(arch, in, hidden, out), 0.0) {
  if (in == 0 || out == 0 || (arch == HeadArch::Mlp && hidden == 0)) {
    throw DimensionError("projection head dimensions must be positive");
  }
}

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  ProjectionHead head(HeadArch::Affine, dim, 0, dim);
  for (std::size_t i = 0; i < dim; ++i) head.params_[i * dim + i] = 1.0;
  return head;
}

ProjectionHead ProjectionHead::affine(std::size_t input_dim, std::size_t output_dim) {
  return ProjectionHead(HeadArch::Affine, input_dim, 0, output_dim);
}

ProjectionHead ProjectionHead::mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim) {
  return ProjectionHead(HeadArch::Mlp, input_dim, hidden_dim, output_dim);
}

ProjectionHead ProjectionHead::mlp_random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                                          std::uint64_t seed) {
  auto head = mlp(input_dim, hidden_dim, output_dim);
  Pcg32 rng(seed, 0x4D4C50ULL);
  auto fill = [&](const ParamBlock& block, double limit) {
    for (std::size_t i = 0; i < block.size; ++i) {
      head.params_[block.offset + i] = limit * (2.0 * rng.uniform_open_closed() - 1.0);
    }
  };
  const auto blocks = head.blocks();
  fill(blocks[0], std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim)));
  fill(blocks[2], std::sqrt(6.0 / static_cast<double>(hidden_dim + output_dim)));
  return head;
}

std::vector<ParamBlock> ProjectionHead::blocks() const {
  const std::size_t d = input_dim_;
  const std::size_t p = output_dim_;
  if (arch_ == HeadArch::Affine) {
    return {{"W", 0, p * d}, {"b", p * d, p}};
  }
  const std::size_t h = hidden_dim_;
  return {{"W1", 0, h * d}, {"b1", h * d, h}, {"W2", h * d + h, p * h}, {"b2", h * d + h + p * h, p}};
}

std::vector<double> ProjectionHead::forward(std::span<const double> x) const {
  if (x.size() != input_dim_) {
    throw DimensionError("head expects input of length " + std::to_string(input_dim_) + ", got " +
                         std::to_string(x.size()));
  }
  std::span<const double> all(params_);
  std::vector<double> y(output_dim_);
  const auto b = blocks();
  if (arch_ == HeadArch::Affine) {
    affine_apply(all.subspan(b[0].offset, b[0].size), all.subspan(b[1].offset, b[1].size), x, y);
    return y;
  }
  std::vector<double> hidden(hidden_dim_);
  affine_apply(all.subspan(b[0].offset, b[0].size), all.subspan(b[1].offset, b[1].size), x, hidden);
  for (double& h : hidden) h = std::max(h, 0.0);
  affine_apply(all.subspan(b[2].offset, b[2].size), all.subspan(b[3].offset, b[3].size), hidden, y);
  return y;
}

void ProjectionHead::accumulate_gradient(std::span<const double> x, std::span<const double> grad_output,
                                         std::span<double> grad_params) const {
  if (x.size() != input_dim_ || grad_output.size() != output_dim_ || grad_params.size() != params_.size()) {
    throw DimensionError("gradient shapes do not match projection head");
  }
  const auto b = blocks();
  if (arch_ == HeadArch::Affine) {
    double* dw = grad_params.data() + b[0].offset;
    double* db = grad_params.data() + b[1].offset;
    for (std::size_t r = 0; r < output_dim_; ++r) {
      const double g = grad_output[r];
      for (std::size_t j = 0; j < input_dim_; ++j) dw[r * input_dim_ + j] += g * x[j];
      db[r] += g;
    }
    return;
  }

  std::span<const double> all(params_);
  std::vector<double> pre(hidden_dim_);
  affine_apply(all.subspan(b[0].offset, b[0].size), all.subspan(b[1].offset, b[1].size), x, pre);

  const double* w2 = params_.data() + b[2].offset;
  double* dw1 = grad_params.data() + b[0].offset;
  double* db1 = grad_params.data() + b[1].offset;
  double* dw2 = grad_params.data() + b[2].offset;
  double* db2 = grad_params.data() + b[3].offset;

  std::vector<double> grad_hidden(hidden_dim_, 0.0);
  for (std::size_t r = 0; r < output_dim_; ++r) {
    const double g = grad_output[r];
    for (std::size_t h = 0; h < hidden_dim_; ++h) {
      dw2[r * hidden_dim_ + h] += g * std::max(pre[h], 0.0);
      grad_hidden[h] += w2[r * hidden_dim_ + h] * g;
    }
    db2[r] += g;
  }
  for (std::size_t h = 0; h < hidden_dim_; ++h) {
    if (!(pre[h] > 0.0)) continue;
    const double g = grad_hidden[h];
    for (std::size_t j = 0; j < input_dim_; ++j) dw1[h * input_dim_ + j] += g * x[j];
    db1[h] += g;
  }
}

std::vector<unsigned char> encode_head(const ProjectionHead& head) {
  detail::ByteWriter w;
  w.bytes(kHeadMagic);
  w.le(static_cast<std::uint32_t>(head.arch()));
  w.le(static_cast<std::uint32_t>(head.input_dim()));
  w.le(static_cast<std::uint32_t>(head.output_dim()));
  w.le(static_cast<std::uint32_t>(head.hidden_dim()));
  for (double v : head.params()) w.le(v);
  return w.take();
}

ProjectionHead decode_head(std::span<const unsigned char> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.bytes(kHeadMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kHeadMagic.begin())) {
    throw DataError("bad magic: not an FSHD1 head checkpoint");
  }
  const auto arch = r.le<std::uint32_t>("architecture tag");
  const auto in = r.le<std::uint32_t>("input dimension");
  const auto out = r.le<std::uint32_t>("output dimension");
  const auto hidden = r.le<std::uint32_t>("hidden dimension");
  if (arch > 1) throw DataError("unknown head architecture tag " + std::to_string(arch));
  if (arch == 0 && hidden != 0) throw DataError("affine head must declare hidden dimension 0");

  auto head = arch == 0 ? ProjectionHead::affine(in, out) : ProjectionHead::mlp(in, hidden, out);
  auto params = head.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] = r.le<double>("parameters", i);
    if (!std::isfinite(params[i])) {
      throw DataError("non-finite parameter " + std::to_string(i), i);
    }
  }
  if (r.remaining() != 0) throw DataError(std::to_string(r.remaining()) + " trailing bytes after parameters");
  return head;
}

void save_head(const ProjectionHead& head, const std::filesystem::path& path) {
  detail::write_file(path, encode_head(head));
}

ProjectionHead load_head(const std::filesystem::path& path) { return decode_head(detail::read_file(path)); }

}  // namespace protoclass
