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

#include "protoclass/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <utility>

#include <json.hpp>

namespace protoclass {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Scored {
  double score;
  std::uint32_t label;
};

bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.label < b.label;
}

Prediction take_top(std::vector<Scored> scored, std::size_t k) {
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
  Prediction p;
  p.ranked_labels.reserve(n);
  p.scores.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.ranked_labels.push_back(scored[i].label);
    p.scores.push_back(scored[i].score);
  }
  return p;
}

void check_query(std::span<const double> query, std::size_t dimension, Metric metric) {
  if (query.size() != dimension) {
    throw DimensionError("query has length " + std::to_string(query.size()) + ", expected " +
                         std::to_string(dimension));
  }
  if (metric == Metric::Cosine && !(norm(query) > 0.0)) {
    throw ZeroNormError("zero query vector has no cosine similarity");
  }
}

double cosine_with_norms(std::span<const double> q, double q_norm, std::span<const double> t, double t_norm) {
  if (!(t_norm > 0.0)) return 0.0;
  return dot(q, t) / (q_norm * t_norm);
}

}  // namespace

std::vector<double> embed_record(const EmbeddingStore& store, const ProjectionHead& head, std::size_t position,
                                 bool normalize_inputs) {
  return head.forward(embedding_input(store, position, normalize_inputs));
}

PrototypeBank build_bank(const EmbeddingStore& store, const ProjectionHead& head, const BankOptions& options) {
  if (options.splits.empty()) throw Error("prototype bank needs at least one split");
  if (store.positions(options.splits).empty()) {
    throw Error("no records in splits {" + options.splits.to_string() + "} to build prototypes from");
  }
  PrototypeBank bank;
  bank.dimension = head.output_dim();
  bank.splits = options.splits;
  bank.normalized = options.normalize_prototypes;
  for (const auto label : store.label_ids()) {
    const auto positions = store.positions(label, options.splits);
    if (positions.empty()) continue;
    std::vector<std::vector<double>> outputs;
    outputs.reserve(positions.size());
    for (auto pos : positions) outputs.push_back(embed_record(store, head, pos, options.normalize_inputs));
    Prototype proto{label, compute_prototype(outputs), positions.size()};
    if (options.normalize_prototypes) proto.vector = l2_normalize(std::span<const double>(proto.vector));
    bank.prototypes.push_back(std::move(proto));
  }
  return bank;
}

double similarity(std::span<const double> query, std::span<const double> target, Metric metric) {
  if (metric == Metric::NegSqEuclidean) return -sq_euclidean(query, target);
  if (query.size() != target.size()) throw DimensionError("similarity between vectors of unequal length");
  return cosine_with_norms(query, norm(query), target, norm(target));
}

Prediction classify_topk(const PrototypeBank& bank, std::span<const double> query, std::size_t k, Metric metric) {
  if (bank.prototypes.empty()) throw Error("prototype bank is empty");
  if (k == 0) throw Error("k must be positive");
  check_query(query, bank.dimension, metric);
  const double q_norm = norm(query);
  std::vector<Scored> scored;
  scored.reserve(bank.prototypes.size());
  for (const auto& p : bank.prototypes) {
    const double s = metric == Metric::Cosine ? cosine_with_norms(query, q_norm, p.vector, norm(p.vector))
                                              : -sq_euclidean(query, p.vector);
    scored.push_back({s, p.label_id});
  }
  return take_top(std::move(scored), k);
}

SupportIndex build_support_index(const EmbeddingStore& store, const ProjectionHead& head, const BankOptions& options) {
  if (options.splits.empty()) throw Error("support index needs at least one split");
  const auto positions = store.positions(options.splits);
  if (positions.empty()) {
    throw Error("no records in splits {" + options.splits.to_string() + "} to search");
  }
  SupportIndex index;
  index.dimension = head.output_dim();
  for (auto pos : positions) {
    index.vectors.push_back(embed_record(store, head, pos, options.normalize_inputs));
    index.labels.push_back(store.record(pos).label_id);
    index.record_ids.push_back(store.record(pos).record_id);
  }
  return index;
}

Prediction nn_topk(const SupportIndex& index, std::span<const double> query, std::size_t k, Metric metric) {
  if (index.vectors.empty()) throw Error("support index is empty");
  if (k == 0) throw Error("k must be positive");
  check_query(query, index.dimension, metric);
  const double q_norm = norm(query);

  // Best image score per label. Ranking labels by (best score, label) is the
  // same as walking images in (score, label) order and keeping first
  // occurrences.
  std::map<std::uint32_t, double> best;
  for (std::size_t i = 0; i < index.vectors.size(); ++i) {
    const auto& v = index.vectors[i];
    const double s =
        metric == Metric::Cosine ? cosine_with_norms(query, q_norm, v, norm(v)) : -sq_euclidean(query, v);
    auto [it, inserted] = best.try_emplace(index.labels[i], s);
    if (!inserted && s > it->second) it->second = s;
  }
  std::vector<Scored> scored;
  scored.reserve(best.size());
  for (const auto& [label, s] : best) scored.push_back({s, label});
  return take_top(std::move(scored), k);
}

Prediction nn_topk(const EmbeddingStore& store, const ProjectionHead& head, std::span<const double> query,
                   std::size_t k, const BankOptions& options, Metric metric) {
  return nn_topk(build_support_index(store, head, options), query, k, metric);
}

double recall_at_k(std::span<const Prediction> predictions, const std::map<std::uint64_t, std::uint32_t>& truth,
                   std::size_t k) {
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : predictions) {
    const auto it = truth.find(p.record_id);
    if (it == truth.end()) throw Error("no truth label for record " + std::to_string(p.record_id));
    const std::size_t n = std::min(k, p.ranked_labels.size());
    if (std::find(p.ranked_labels.begin(), p.ranked_labels.begin() + static_cast<std::ptrdiff_t>(n), it->second) !=
        p.ranked_labels.begin() + static_cast<std::ptrdiff_t>(n)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<Prediction> predict(const EmbeddingStore& store, const ProjectionHead& head, const EvalOptions& options,
                                std::size_t k) {
  const auto queries = store.positions(SplitSet{options.test_split});
  std::vector<Prediction> out;
  out.reserve(queries.size());
  if (options.method == Method::Prototype) {
    const auto bank = build_bank(store, head, options.bank);
    for (auto pos : queries) {
      auto p = classify_topk(bank, embed_record(store, head, pos, options.bank.normalize_inputs), k, options.metric);
      p.record_id = store.record(pos).record_id;
      out.push_back(std::move(p));
    }
  } else {
    const auto index = build_support_index(store, head, options.bank);
    for (auto pos : queries) {
      auto p = nn_topk(index, embed_record(store, head, pos, options.bank.normalize_inputs), k, options.metric);
      p.record_id = store.record(pos).record_id;
      out.push_back(std::move(p));
    }
  }
  return out;
}

EvalResult evaluate(const EmbeddingStore& store, const ProjectionHead& head, const EvalOptions& options) {
  if (options.k_list.empty()) throw Error("k list is empty");
  for (auto k : options.k_list) {
    if (k == 0) throw Error("k must be positive");
  }
  const auto queries = store.positions(SplitSet{options.test_split});
  if (queries.empty()) {
    throw Error("evaluation split '" + std::string(split_name(options.test_split)) + "' has no records");
  }
  const std::size_t k_max = *std::max_element(options.k_list.begin(), options.k_list.end());

  EvalResult result;
  result.predictions = predict(store, head, options, k_max);

  std::map<std::uint64_t, std::uint32_t> truth;
  for (auto pos : queries) truth.emplace(store.record(pos).record_id, store.record(pos).label_id);

  auto& report = result.report;
  report.n = queries.size();
  for (auto k : options.k_list) report.recall_at[k] = recall_at_k(result.predictions, truth, k);

  const auto support = class_counts(store, options.bank.splits);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto label = store.record(queries[i]).label_id;
    auto& stats = report.per_class[label];
    const auto it = support.find(label);
    stats.support_count = it == support.end() ? 0 : it->second;
    ++stats.total;
    const auto& ranked = result.predictions[i].ranked_labels;
    const auto rank = static_cast<std::size_t>(std::find(ranked.begin(), ranked.end(), label) - ranked.begin());
    for (auto k : options.k_list) {
      stats.hits[k] += rank < k ? 1 : 0;
    }
  }
  return result;
}

std::string report_to_json(const EvalReport& report, const std::map<std::string, std::string>& extra) {
  nlohmann::json j = nlohmann::json::object();
  j["n"] = report.n;
  j["recall_at"] = nlohmann::json::object();
  for (const auto& [k, v] : report.recall_at) j["recall_at"][std::to_string(k)] = v;
  j["per_class"] = nlohmann::json::object();
  for (const auto& [label, s] : report.per_class) {
    nlohmann::json c;
    c["support_count"] = s.support_count;
    c["total"] = s.total;
    c["hits"] = nlohmann::json::object();
    for (const auto& [k, h] : s.hits) c["hits"][std::to_string(k)] = h;
    j["per_class"][std::to_string(label)] = std::move(c);
  }
  for (const auto& [key, value] : extra) j[key] = value;
  return j.dump(2) + "\n";
}

void write_predictions_csv(std::span<const Prediction> predictions, std::ostream& out) {
  out << "record_id,rank,label_id,score\n";
  out << std::setprecision(17);
  for (const auto& p : predictions) {
    for (std::size_t r = 0; r < p.ranked_labels.size(); ++r) {
      out << p.record_id << ',' << (r + 1) << ',' << p.ranked_labels[r] << ',' << p.scores[r] << '\n';
    }
  }
}

}  // namespace protoclass
