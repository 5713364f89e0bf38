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

// Test-only helpers and independent oracles. Nothing here calls into the
// library code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "protoclass/episode.hpp"
#include "protoclass/head.hpp"
#include "protoclass/rng.hpp"
#include "protoclass/store.hpp"

namespace protoclass::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("protoclass_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random store: `classes` labels (ids spaced by 3 so they are not dense),
/// each record in a random split, gaussian components.
inline EmbeddingStore random_store(std::uint64_t seed, std::size_t records, std::size_t dim, std::size_t classes,
                                   bool random_splits = true) {
  Pcg32 rng(seed, 77);
  std::vector<EmbeddingRecord> recs;
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < records; ++i) {
    EmbeddingRecord r;
    do {
      r.record_id = rng.next_u64() % 1000000007ULL;
    } while (!ids.insert(r.record_id).second);
    r.label_id = static_cast<std::uint32_t>(3 * rng.uniform_below(classes) + 1);
    r.split = random_splits ? static_cast<Split>(rng.uniform_below(3)) : Split::Train;
    r.vector.resize(dim);
    for (auto& v : r.vector) v = static_cast<float>(rng.gaussian());
    recs.push_back(std::move(r));
  }
  LabelMap labels;
  for (const auto& r : recs) labels.try_emplace(r.label_id, "species " + std::to_string(r.label_id) + " \xC3\xA9");
  return EmbeddingStore(dim, std::move(recs), std::move(labels));
}

inline std::vector<double> to_unit(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += double(x) * double(x);
  const double n = std::sqrt(s);
  std::vector<double> out;
  for (float x : v) out.push_back(double(x) / n);
  return out;
}

inline std::vector<double> random_vector(Pcg32& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

/// Full sort of (score, label) pairs, score descending then label ascending.
inline std::vector<std::uint32_t> brute_rank(std::vector<std::pair<double, std::uint32_t>> scored, std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < scored.size() && out.size() < k; ++i) out.push_back(scored[i].second);
  return out;
}

/// Cosine written the long way: normalize both sides, then dot.
inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0.0, nb = 0.0;
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (nb == 0.0) return 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] / na) * (b[i] / nb);
  return d;
}

inline double oracle_neg_sq(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return -d;
}

/// Nearest-neighbor oracle: sort every image, walk the list, keep first
/// occurrences of each label.
inline std::vector<std::uint32_t> brute_nn(const std::vector<std::vector<double>>& images,
                                           const std::vector<std::uint32_t>& labels, const std::vector<double>& query,
                                           std::size_t k, bool cosine) {
  std::vector<std::pair<double, std::uint32_t>> scored;
  for (std::size_t i = 0; i < images.size(); ++i) {
    scored.emplace_back(cosine ? oracle_cosine(query, images[i]) : oracle_neg_sq(query, images[i]), labels[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::uint32_t> out;
  for (const auto& [s, label] : scored) {
    if (out.size() == k) break;
    if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(label);
  }
  return out;
}

/// The prototype-averaging baseline, coded from its definition: per class,
/// the mean of L2-normalized train embeddings; each query goes to the
/// prototypes ranked by cosine similarity.
inline std::map<std::uint64_t, std::vector<std::uint32_t>> baseline_oracle(const EmbeddingStore& store,
                                                                           std::size_t k) {
  std::map<std::uint32_t, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& r : store.records()) {
    if (r.split != Split::Train) continue;
    auto& [sum, n] = sums[r.label_id];
    const auto u = to_unit(r.vector);
    if (sum.empty()) sum.assign(u.size(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) sum[i] += u[i];
    ++n;
  }
  std::map<std::uint64_t, std::vector<std::uint32_t>> out;
  for (const auto& r : store.records()) {
    if (r.split != Split::Test) continue;
    const auto q = to_unit(r.vector);
    std::vector<std::pair<double, std::uint32_t>> scored;
    for (const auto& [label, sn] : sums) {
      std::vector<double> mean(sn.first);
      for (auto& x : mean) x /= double(sn.second);
      scored.emplace_back(oracle_cosine(q, mean), label);
    }
    out[r.record_id] = brute_rank(std::move(scored), k);
  }
  return out;
}

/// Head forward written directly against the documented parameter layout.
inline std::vector<double> oracle_forward(const ProjectionHead& head, const std::vector<double>& x) {
  const auto p = head.params();
  const std::size_t d = head.input_dim(), out = head.output_dim(), h = head.hidden_dim();
  auto affine = [&](std::size_t w_off, std::size_t b_off, std::size_t rows, const std::vector<double>& in) {
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      y[r] = p[b_off + r];
      for (std::size_t j = 0; j < in.size(); ++j) y[r] += p[w_off + r * in.size() + j] * in[j];
    }
    return y;
  };
  if (head.arch() == HeadArch::Affine) return affine(0, out * d, out, x);
  auto hidden = affine(0, h * d, h, x);
  for (auto& v : hidden) v = v > 0.0 ? v : 0.0;
  return affine(h * d + h, h * d + h + out * h, out, hidden);
}

/// Prototypical loss from its definition: mean over queries of
/// -log( exp(-d_y) / sum_k exp(-d_k) ).
inline double oracle_loss(const ProjectionHead& head, const Episode& ep, const EmbeddingStore& store, bool normalize) {
  auto input = [&](std::size_t pos) {
    const auto& v = store.record(pos).vector;
    return normalize ? to_unit(v) : std::vector<double>(v.begin(), v.end());
  };
  const std::size_t ways = ep.class_ids.size();
  std::vector<std::vector<double>> protos;
  for (std::size_t k = 0; k < ways; ++k) {
    std::vector<double> sum;
    for (std::size_t s = 0; s < ep.shots; ++s) {
      const auto z = oracle_forward(head, input(ep.support[k * ep.shots + s]));
      if (sum.empty()) sum.assign(z.size(), 0.0);
      for (std::size_t i = 0; i < z.size(); ++i) sum[i] += z[i];
    }
    for (auto& x : sum) x /= double(ep.shots);
    protos.push_back(sum);
  }
  double total = 0.0;
  for (std::size_t q = 0; q < ep.query.size(); ++q) {
    const auto z = oracle_forward(head, input(ep.query[q]));
    double denom = 0.0, num = 0.0;
    for (std::size_t k = 0; k < ways; ++k) {
      const double e = std::exp(oracle_neg_sq(z, protos[k]));
      denom += e;
      if (k == q / ep.queries) num = e;
    }
    total += -std::log(num / denom);
  }
  return total / double(ep.query.size());
}

/// Central differences of oracle_loss; returns the infinity-norm relative
/// error max|a - n| / max(max|a|, max|n|).
inline double gradient_relative_error(const ProjectionHead& head, const Episode& ep, const EmbeddingStore& store,
                                      bool normalize, const std::vector<double>& analytic, double h = 1e-5) {
  double max_diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < head.param_count(); ++i) {
    auto plus = head;
    auto minus = head;
    plus.params()[i] += h;
    minus.params()[i] -= h;
    const double numeric = (oracle_loss(plus, ep, store, normalize) - oracle_loss(minus, ep, store, normalize)) / (2 * h);
    max_diff = std::max(max_diff, std::fabs(numeric - analytic[i]));
    scale = std::max({scale, std::fabs(numeric), std::fabs(analytic[i])});
  }
  return scale > 0.0 ? max_diff / scale : max_diff;
}

/// Random affine head near identity (P = D) or a random MLP.
inline ProjectionHead random_head(Pcg32& rng, std::size_t dim, bool mlp) {
  if (mlp) return ProjectionHead::mlp_random(dim, dim + 1, dim, rng.next_u64());
  auto head = ProjectionHead::identity(dim);
  for (auto& p : head.params()) p += 0.3 * rng.gaussian();
  return head;
}

}  // namespace protoclass::testing
