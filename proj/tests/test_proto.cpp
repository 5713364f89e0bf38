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

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "protoclass/proto.hpp"
#include "protoclass/trainer.hpp"
#include "support.hpp"

using namespace protoclass;
namespace pt = protoclass::testing;

namespace {

// Store with the given vectors, labels and splits all Train; record ids are
// positions.
EmbeddingStore make_store(std::size_t dim, const std::vector<std::pair<std::uint32_t, std::vector<float>>>& rows) {
  std::vector<EmbeddingRecord> recs;
  for (const auto& [label, v] : rows) recs.push_back({recs.size(), label, Split::Train, v});
  auto labels = default_label_map(recs);
  return EmbeddingStore(dim, std::move(recs), std::move(labels));
}

Episode manual_episode(std::vector<std::uint32_t> classes, std::vector<std::size_t> support,
                       std::vector<std::size_t> query, std::size_t shots, std::size_t queries) {
  Episode ep;
  ep.class_ids = std::move(classes);
  ep.support = std::move(support);
  ep.query = std::move(query);
  ep.shots = shots;
  ep.queries = queries;
  return ep;
}

}  // namespace

TEST_CASE("forward") {
  const std::vector<double> x{0.3, -1.2, 4.0};
  CHECK(ProjectionHead::identity(3).forward(x) == x);

  auto twice = ProjectionHead::affine(2, 2);
  twice.params()[0] = 2.0;
  twice.params()[3] = 2.0;
  CHECK(twice.forward(std::vector<double>{1.0, -1.0}) == std::vector<double>{2.0, -2.0});

  auto mlp = ProjectionHead::mlp(2, 2, 2);
  const auto b = mlp.blocks();
  mlp.params()[b[0].offset + 0] = 1.0;
  mlp.params()[b[0].offset + 3] = 1.0;
  mlp.params()[b[2].offset + 0] = 1.0;
  mlp.params()[b[2].offset + 3] = 1.0;
  CHECK(mlp.forward(std::vector<double>{-1.0, 2.0}) == std::vector<double>{0.0, 2.0});

  CHECK_THROWS_AS(ProjectionHead::identity(3).forward(std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("parameter blocks tile the parameter vector") {
  for (const auto& head : {ProjectionHead::identity(4), ProjectionHead::affine(3, 5), ProjectionHead::mlp(3, 6, 2)}) {
    std::size_t next = 0;
    for (const auto& b : head.blocks()) {
      CHECK(b.offset == next);
      next += b.size;
    }
    CHECK(next == head.param_count());
  }
}

TEST_CASE("compute_prototype") {
  const std::vector<std::vector<double>> two{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(compute_prototype(two) == std::vector<double>{0.5, 0.5});
  const std::vector<std::vector<double>> one{{0.25, -7.0}};
  CHECK(compute_prototype(one) == one[0]);
  CHECK_THROWS_AS(compute_prototype(std::vector<std::vector<double>>{}), Error);
  CHECK_THROWS_AS(compute_prototype(std::vector<std::vector<double>>{{1.0}, {1.0, 2.0}}), DimensionError);

  Pcg32 rng(3, 3);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> s;
    for (int i = 0; i < 5; ++i) s.push_back(pt::random_vector(rng, 4));
    const auto a = compute_prototype(s);
    std::reverse(s.begin(), s.end());
    const auto r = compute_prototype(s);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(r[i]).epsilon(1e-14));
  }
}

TEST_CASE("sq_euclidean") {
  const std::vector<double> x{1.5, -2.0};
  CHECK(sq_euclidean(x, x) == 0.0);
  CHECK(sq_euclidean(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) == 25.0);
  CHECK_THROWS_AS(sq_euclidean(std::vector<double>{1.0}, x), DimensionError);

  Pcg32 rng(4, 4);
  for (int t = 0; t < 100; ++t) {
    const auto u = pt::to_unit(std::vector<float>{float(rng.gaussian()), float(rng.gaussian()), float(rng.gaussian())});
    const auto w = pt::to_unit(std::vector<float>{float(rng.gaussian()), float(rng.gaussian()), float(rng.gaussian())});
    double dot = 0.0;
    for (int i = 0; i < 3; ++i) dot += u[i] * w[i];
    CHECK(std::fabs(sq_euclidean(u, w) - (2.0 - 2.0 * dot)) <= 1e-6);
  }
}

TEST_CASE("class_posteriors") {
  const auto eq = class_posteriors(std::vector<double>{2.0, 2.0, 2.0, 2.0});
  for (double p : eq) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  const auto two = class_posteriors(std::vector<double>{0.0, std::log(3.0)});
  CHECK(two[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(two[1] == doctest::Approx(0.25).epsilon(1e-14));

  const auto far = class_posteriors(std::vector<double>{0.0, 50.0, 75.0, 1e4});
  CHECK(far[0] >= 1.0 - 1e-20);

  Pcg32 rng(6, 6);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> d(2 + t % 30);
    const double scale = std::pow(10.0, double(t % 9) - 2.0);  // 1e-2 .. 1e6
    for (auto& x : d) x = std::fabs(rng.gaussian()) * scale;
    const auto p = class_posteriors(d);
    double sum = 0.0;
    for (double v : p) {
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("loss: query on its prototype, rivals far away") {
  const auto store = make_store(2, {{0, {0.0f, 0.0f}}, {0, {0.0f, 0.0f}}, {1, {10.0f, 0.0f}}, {1, {10.0f, 0.0f}}});
  const auto ep = manual_episode({0, 1}, {0, 2}, {1, 3}, 1, 1);
  const auto r = episode_loss_and_grads(ProjectionHead::identity(2), ep, store, false);
  CHECK(r.loss <= 1e-20);
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("loss: equidistant prototypes give ln K") {
  // Supports on the axes, queries at the origin.
  const auto store = make_store(2, {{0, {1.0f, 0.0f}},
                                    {1, {-1.0f, 0.0f}},
                                    {2, {0.0f, 1.0f}},
                                    {3, {0.0f, -1.0f}},
                                    {0, {0.0f, 0.0f}},
                                    {1, {0.0f, 0.0f}},
                                    {2, {0.0f, 0.0f}},
                                    {3, {0.0f, 0.0f}}});
  const auto ep = manual_episode({0, 1, 2, 3}, {0, 1, 2, 3}, {4, 5, 6, 7}, 1, 1);
  const auto r = episode_loss_and_grads(ProjectionHead::identity(2), ep, store, false);
  CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  for (const auto& p : r.probabilities) {
    double s = 0.0;
    for (double v : p) s += v;
    CHECK(std::fabs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("loss agrees with the definition-level oracle") {
  Pcg32 rng(12, 1);
  for (int t = 0; t < 20; ++t) {
    const auto store = pt::random_store(100 + t, 40, 5, 4, false);
    EpisodeConfig c;
    c.ways = 3;
    c.shots = 2;
    c.queries = 2;
    c.seed = t;
    const auto ep = sample_episode(store, c, 0);
    const auto head = pt::random_head(rng, 5, t % 2 == 1);
    for (bool norm : {true, false}) {
      const auto r = episode_loss_and_grads(head, ep, store, norm);
      CHECK(r.loss == doctest::Approx(pt::oracle_loss(head, ep, store, norm)).epsilon(1e-12));
      CHECK(r.loss == doctest::Approx(episode_loss(head, ep, store, norm)).epsilon(1e-14));
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  Pcg32 rng(2025, 9);
  for (int t = 0; t < 40; ++t) {
    const std::size_t dim = 2 + rng.uniform_below(7);
    const auto store = pt::random_store(500 + t, 30, dim, 3, false);
    EpisodeConfig c;
    c.ways = 3;
    c.shots = 2;
    c.queries = 1 + t % 2;
    c.seed = t;
    const auto ep = sample_episode(store, c, t);
    const bool mlp = t % 4 == 3;
    const auto head = pt::random_head(rng, dim, mlp);
    const auto r = episode_loss_and_grads(head, ep, store, t % 3 != 0);
    const double err = pt::gradient_relative_error(head, ep, store, t % 3 != 0, r.gradients);
    CAPTURE(t);
    CAPTURE(mlp);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("bias gradient of an affine head vanishes") {
  // A common shift of every embedding leaves all distances unchanged.
  Pcg32 rng(8, 8);
  const auto store = pt::random_store(77, 30, 4, 3, false);
  EpisodeConfig c;
  c.ways = 3;
  c.shots = 2;
  c.queries = 1;
  const auto ep = sample_episode(store, c, 0);
  const auto head = pt::random_head(rng, 4, false);
  const auto r = episode_loss_and_grads(head, ep, store);
  const auto bias = head.blocks()[1];
  for (std::size_t i = 0; i < bias.size; ++i) CHECK(std::fabs(r.gradients[bias.offset + i]) <= 1e-12);
}

TEST_CASE("unit vectors: nearest by distance is most similar by cosine") {
  Pcg32 rng(31, 2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 2 + t % 10;
    const auto q = pt::to_unit([&] {
      std::vector<float> v(dim);
      for (auto& x : v) x = float(rng.gaussian());
      return v;
    }());
    std::size_t best_d = 0, best_c = 0;
    double min_d = 1e300, max_c = -1e300;
    for (std::size_t k = 0; k < 12; ++k) {
      std::vector<float> v(dim);
      for (auto& x : v) x = float(rng.gaussian());
      const auto c = pt::to_unit(v);
      const double d = sq_euclidean(q, c);
      double cs = 0.0;
      for (std::size_t i = 0; i < dim; ++i) cs += q[i] * c[i];
      if (d < min_d) min_d = d, best_d = k;
      if (cs > max_c) max_c = cs, best_c = k;
    }
    CHECK(best_d == best_c);
  }
}

TEST_CASE("loss falls over 50 steps on a fixed separable episode") {
  const auto store = make_store(3, {{0, {1.0f, 0.1f, 0.0f}},
                                    {0, {0.9f, 0.0f, 0.1f}},
                                    {0, {1.0f, 0.05f, 0.05f}},
                                    {1, {0.1f, 1.0f, 0.0f}},
                                    {1, {0.0f, 0.9f, 0.1f}},
                                    {1, {0.05f, 1.0f, 0.0f}},
                                    {2, {0.0f, 0.1f, 1.0f}},
                                    {2, {0.1f, 0.0f, 0.9f}},
                                    {2, {0.0f, 0.05f, 1.0f}}});
  const auto ep = manual_episode({0, 1, 2}, {0, 1, 3, 4, 6, 7}, {2, 5, 8}, 2, 1);
  auto head = ProjectionHead::identity(3);
  OptimizerState state;
  const auto blocks = head.blocks();
  const double initial = episode_loss(head, ep, store);
  for (int step = 0; step < 50; ++step) {
    const auto r = episode_loss_and_grads(head, ep, store);
    adam_step(state, AdamConfig{}, head.params(), r.gradients, 1e-2, blocks);
  }
  const double final_loss = episode_loss(head, ep, store);
  CHECK(final_loss < initial);
}

TEST_CASE("head checkpoints") {
  const auto dir = pt::temp_dir("head_io");
  Pcg32 rng(1, 1);
  for (const auto& head : {pt::random_head(rng, 5, false), pt::random_head(rng, 4, true), ProjectionHead::affine(3, 2)}) {
    const auto bytes = encode_head(head);
    CHECK(bytes.size() == kHeadHeaderBytes + 8 * head.param_count());
    CHECK(decode_head(bytes) == head);
    save_head(head, dir / "h.fshd");
    CHECK(load_head(dir / "h.fshd") == head);
  }

  const auto bytes = encode_head(ProjectionHead::identity(2));
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "FSHD1");
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0);   // affine tag
  CHECK(bytes[10] == 2);  // D
  CHECK(bytes[14] == 2);  // P
  CHECK(bytes[18] == 0);  // H

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_head(bad), DataError);
  CHECK_THROWS_AS(decode_head(std::vector<unsigned char>(bytes.begin(), bytes.end() - 1)), DataError);
  auto tag = bytes;
  tag[6] = 9;
  CHECK_THROWS_AS(decode_head(tag), DataError);
  auto nan = bytes;
  for (int i = 0; i < 8; ++i) nan[kHeadHeaderBytes + i] = 0xFF;
  CHECK_THROWS_AS(decode_head(nan), DataError);
  CHECK_THROWS_AS(load_head(dir / "missing.fshd"), Error);
}
