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
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "protoclass/head.hpp"
#include "protoclass/proto.hpp"
#include "protoclass/store.hpp"

namespace protoclass {

enum class Metric { Cosine, NegSqEuclidean };

struct BankOptions {
  SplitSet splits{Split::Train};
  /// L2-normalize store vectors before the head.
  bool normalize_inputs = true;
  /// L2-normalize each prototype after averaging.
  bool normalize_prototypes = false;
};

struct PrototypeBank {
  std::size_t dimension = 0;
  /// Ascending label_id, one per class with at least one support record.
  std::vector<Prototype> prototypes;
  SplitSet splits;
  bool normalized = false;
};

struct Prediction {
  std::uint64_t record_id = 0;
  std::vector<std::uint32_t> ranked_labels;
  /// Similarity per ranked label, nonincreasing. NegSqEuclidean scores are
  /// negated squared distances.
  std::vector<double> scores;
};

/// Head outputs for store records: the shared "embed" step of every method.
std::vector<double> embed_record(const EmbeddingStore& store, const ProjectionHead& head, std::size_t position,
                                 bool normalize_inputs);

/// Mean head output per class over the chosen splits. Throws Error when the
/// splits hold no records.
PrototypeBank build_bank(const EmbeddingStore& store, const ProjectionHead& head, const BankOptions& options);

/// Similarity of `query` to `target` under `metric`. For Cosine a zero
/// target scores 0.
double similarity(std::span<const double> query, std::span<const double> target, Metric metric);

/// Top-k classes by descending similarity, ties by ascending label_id.
/// Throws ZeroNormError for a zero query under Cosine.
Prediction classify_topk(const PrototypeBank& bank, std::span<const double> query, std::size_t k, Metric metric);

/// Embedded support images for nearest-neighbor search; built once per
/// evaluation and shared across queries.
struct SupportIndex {
  std::size_t dimension = 0;
  std::vector<std::vector<double>> vectors;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint64_t> record_ids;
};

SupportIndex build_support_index(const EmbeddingStore& store, const ProjectionHead& head, const BankOptions& options);

/// Ranks images by similarity and keeps the first k distinct labels, each
/// scored by its best image.
Prediction nn_topk(const SupportIndex& index, std::span<const double> query, std::size_t k, Metric metric);
Prediction nn_topk(const EmbeddingStore& store, const ProjectionHead& head, std::span<const double> query,
                   std::size_t k, const BankOptions& options, Metric metric);

/// Fraction of predictions whose true label is within the first k ranked
/// labels. Throws Error if a record has no truth entry.
double recall_at_k(std::span<const Prediction> predictions, const std::map<std::uint64_t, std::uint32_t>& truth,
                   std::size_t k);

enum class Method { Prototype, NearestNeighbor };

struct EvalOptions {
  Method method = Method::Prototype;
  BankOptions bank{};
  Split test_split = Split::Test;
  std::vector<std::size_t> k_list{5, 10};
  Metric metric = Metric::Cosine;
};

struct ClassStats {
  /// Support records for this class in the bank splits.
  std::size_t support_count = 0;
  std::map<std::size_t, std::size_t> hits;
  std::size_t total = 0;
};

struct EvalReport {
  std::size_t n = 0;
  std::map<std::size_t, double> recall_at;
  std::map<std::uint32_t, ClassStats> per_class;
};

struct EvalResult {
  EvalReport report;
  /// One per test record in store order, ranked to max(k_list).
  std::vector<Prediction> predictions;
};

/// Predictions for every record of `options.test_split`, in store order.
std::vector<Prediction> predict(const EmbeddingStore& store, const ProjectionHead& head, const EvalOptions& options,
                                std::size_t k);

EvalResult evaluate(const EmbeddingStore& store, const ProjectionHead& head, const EvalOptions& options);

/// JSON object with keys n, recall_at, per_class (and any extra members
/// passed in `extra`, e.g. a config digest). Keys are sorted; floats use
/// shortest round-trip formatting.
std::string report_to_json(const EvalReport& report, const std::map<std::string, std::string>& extra = {});

/// CSV `record_id,rank,label_id,score`, ranks starting at 1.
void write_predictions_csv(std::span<const Prediction> predictions, std::ostream& out);

}  // namespace protoclass
