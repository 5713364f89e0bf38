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

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protoclass/error.hpp"

namespace protoclass {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Val, Split::Test};

std::string_view split_name(Split split);
/// Accepts "train", "val", "test" (case-insensitive).
Split parse_split(std::string_view text);

/// Small value set of splits.
class SplitSet {
 public:
  constexpr SplitSet() = default;
  constexpr SplitSet(std::initializer_list<Split> splits) {
    for (Split s : splits) insert(s);
  }

  constexpr void insert(Split s) { bits_ |= bit(s); }
  constexpr bool contains(Split s) const { return (bits_ & bit(s)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool operator==(const SplitSet&) const = default;

  /// Comma-separated list, e.g. "train,val".
  static SplitSet parse(std::string_view text);
  std::string to_string() const;

 private:
  static constexpr std::uint8_t bit(Split s) { return static_cast<std::uint8_t>(1U << static_cast<unsigned>(s)); }
  std::uint8_t bits_ = 0;
};

struct EmbeddingRecord {
  std::uint64_t record_id = 0;
  std::uint32_t label_id = 0;
  Split split = Split::Train;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

using LabelMap = std::map<std::uint32_t, std::string>;

/// Immutable, validated collection of embeddings. Every accessor is const so
/// a constructed store can be shared freely between threads.
class EmbeddingStore {
 public:
  /// Validates dimension, finiteness, id uniqueness and label-map coverage.
  /// Throws DataError naming the offending record index.
  EmbeddingStore(std::size_t dimension, std::vector<EmbeddingRecord> records, LabelMap labels);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::span<const EmbeddingRecord> records() const noexcept { return records_; }
  const EmbeddingRecord& record(std::size_t position) const { return records_.at(position); }
  const LabelMap& labels() const noexcept { return labels_; }

  /// Record positions carrying `label` in `split`, ascending.
  std::span<const std::size_t> positions(std::uint32_t label, Split split) const;
  /// Record positions carrying `label` in any of `splits`, ascending.
  std::vector<std::size_t> positions(std::uint32_t label, SplitSet splits) const;
  /// All positions in the given splits, ascending.
  std::vector<std::size_t> positions(SplitSet splits) const;
  /// Every label with at least one record, ascending.
  std::vector<std::uint32_t> label_ids() const;

  bool operator==(const EmbeddingStore& other) const {
    return dimension_ == other.dimension_ && records_ == other.records_ && labels_ == other.labels_;
  }

 private:
  std::size_t dimension_;
  std::vector<EmbeddingRecord> records_;
  LabelMap labels_;
  std::map<std::uint32_t, std::array<std::vector<std::size_t>, 3>> label_index_;
};

enum class StoreFormat { Binary, Csv };

/// Binary layout ("FSEB"):
///   "FSEB1\0" | u32 D | u64 N | u32 L | L bytes JSON label map |
///   N x ( u64 record_id | u32 label_id | u8 split | D x f32 )
/// All integers and floats little-endian.
inline constexpr std::array<unsigned char, 6> kStoreMagic = {'F', 'S', 'E', 'B', '1', '\0'};
inline constexpr std::size_t kStoreFixedHeaderBytes = 6 + 4 + 8 + 4;

EmbeddingStore load_store(const std::filesystem::path& path, StoreFormat format = StoreFormat::Binary);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

std::vector<unsigned char> encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::span<const unsigned char> bytes);

/// CSV header: record_id,label_id,split,v0,...,v{D-1}. Split column accepts
/// names or the numeric codes 0/1/2. Label names are synthesized as
/// "label_<id>" since the CSV carries none.
EmbeddingStore parse_store_csv(std::string_view text);

/// Label map with "label_<id>" for every label used by `records`.
LabelMap default_label_map(std::span<const EmbeddingRecord> records);

/// Returns v / |v|, norm accumulated in double. Throws ZeroNormError.
std::vector<double> l2_normalize(std::span<const double> v);
std::vector<float> l2_normalize(std::span<const float> v);

/// Record count per label over the chosen splits.
std::map<std::uint32_t, std::size_t> class_counts(const EmbeddingStore& store, SplitSet splits);

}  // namespace protoclass
