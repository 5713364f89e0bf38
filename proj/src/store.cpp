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

#include "protoclass/store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bytes.hpp"

namespace protoclass {

using detail::ByteReader;
using detail::ByteWriter;
using detail::read_file;
using detail::write_file;

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view text) {
  const std::string s = lower(trim(text));
  if (s == "train" || s == "0") return Split::Train;
  if (s == "val" || s == "validation" || s == "1") return Split::Val;
  if (s == "test" || s == "2") return Split::Test;
  throw Error("unknown split '" + std::string(text) + "'");
}

SplitSet SplitSet::parse(std::string_view text) {
  SplitSet set;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto token = trim(text.substr(0, comma));
    if (!token.empty()) set.insert(parse_split(token));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return set;
}

std::string SplitSet::to_string() const {
  std::string out;
  for (Split s : kAllSplits) {
    if (!contains(s)) continue;
    if (!out.empty()) out += ',';
    out += split_name(s);
  }
  return out;
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::vector<EmbeddingRecord> records, LabelMap labels)
    : dimension_(dimension), records_(std::move(records)), labels_(std::move(labels)) {
  if (dimension_ == 0) throw DataError("embedding dimension must be positive");
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.vector.size() != dimension_) {
      throw DataError("dimension mismatch at record " + std::to_string(i) + ": expected " +
                          std::to_string(dimension_) + " components, got " + std::to_string(r.vector.size()),
                      i);
    }
    for (std::size_t j = 0; j < r.vector.size(); ++j) {
      if (!std::isfinite(r.vector[j])) {
        throw DataError("non-finite component " + std::to_string(j) + " at record " + std::to_string(i), i);
      }
    }
    if (static_cast<unsigned>(r.split) > 2) {
      throw DataError("invalid split code at record " + std::to_string(i), i);
    }
    if (!seen.insert(r.record_id).second) {
      throw DataError("duplicate record_id " + std::to_string(r.record_id) + " at record " + std::to_string(i), i);
    }
    if (!labels_.contains(r.label_id)) {
      throw DataError("label " + std::to_string(r.label_id) + " at record " + std::to_string(i) +
                          " has no label-map entry",
                      i);
    }
    label_index_[r.label_id][static_cast<std::size_t>(r.split)].push_back(i);
  }
}

std::span<const std::size_t> EmbeddingStore::positions(std::uint32_t label, Split split) const {
  const auto it = label_index_.find(label);
  if (it == label_index_.end()) return {};
  return it->second[static_cast<std::size_t>(split)];
}

std::vector<std::size_t> EmbeddingStore::positions(std::uint32_t label, SplitSet splits) const {
  std::vector<std::size_t> out;
  for (Split s : kAllSplits) {
    if (!splits.contains(s)) continue;
    const auto p = positions(label, s);
    out.insert(out.end(), p.begin(), p.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> EmbeddingStore::positions(SplitSet splits) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (splits.contains(records_[i].split)) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> EmbeddingStore::label_ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(label_index_.size());
  for (const auto& [label, _] : label_index_) out.push_back(label);
  return out;
}

LabelMap default_label_map(std::span<const EmbeddingRecord> records) {
  LabelMap labels;
  for (const auto& r : records) labels.try_emplace(r.label_id, "label_" + std::to_string(r.label_id));
  return labels;
}

std::vector<unsigned char> encode_store(const EmbeddingStore& store) {
  nlohmann::json label_json = nlohmann::json::object();
  for (const auto& [id, name] : store.labels()) label_json[std::to_string(id)] = name;
  const std::string label_text = label_json.dump();

  ByteWriter w;
  w.bytes(kStoreMagic);
  w.le(static_cast<std::uint32_t>(store.dimension()));
  w.le(static_cast<std::uint64_t>(store.size()));
  w.le(static_cast<std::uint32_t>(label_text.size()));
  w.bytes({reinterpret_cast<const unsigned char*>(label_text.data()), label_text.size()});
  for (const auto& r : store.records()) {
    w.le(r.record_id);
    w.le(r.label_id);
    w.le(static_cast<std::uint8_t>(r.split));
    for (float v : r.vector) w.le(v);
  }
  return w.take();
}

EmbeddingStore decode_store(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(kStoreMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kStoreMagic.begin())) {
    throw DataError("bad magic at byte offset 0: not an FSEB1 embedding store");
  }
  const auto dimension = r.le<std::uint32_t>("dimension");
  const auto count = r.le<std::uint64_t>("record count");
  const auto label_len = r.le<std::uint32_t>("label-map length");
  if (dimension == 0) throw DataError("header declares dimension 0 at byte offset 6");
  const auto label_bytes = r.bytes(label_len, "label map");

  LabelMap labels;
  try {
    const auto label_json =
        nlohmann::json::parse(std::string(reinterpret_cast<const char*>(label_bytes.data()), label_bytes.size()));
    if (!label_json.is_object()) throw DataError("label map at byte offset " + std::to_string(kStoreFixedHeaderBytes) + " is not a JSON object");
    for (const auto& [key, value] : label_json.items()) {
      std::uint32_t id = 0;
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
      if (ec != std::errc{} || ptr != key.data() + key.size()) {
        throw DataError("label map key '" + key + "' at byte offset " + std::to_string(kStoreFixedHeaderBytes) +
                        " is not an unsigned integer");
      }
      labels.emplace(id, value.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed label map at byte offset " + std::to_string(kStoreFixedHeaderBytes) + ": " + e.what());
  }

  const std::size_t record_bytes = 8 + 4 + 1 + 4 * static_cast<std::size_t>(dimension);
  if (count > r.remaining() / record_bytes) {
    const std::size_t complete = r.remaining() / record_bytes;
    throw DataError("truncated file: header declares " + std::to_string(count) + " records but only " +
                        std::to_string(complete) + " fit, record " + std::to_string(complete),
                    complete);
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.record_id = r.le<std::uint64_t>("record_id", i);
    rec.label_id = r.le<std::uint32_t>("label_id", i);
    const auto split = r.le<std::uint8_t>("split", i);
    if (split > 2) throw DataError("invalid split code " + std::to_string(split) + " at record " + std::to_string(i), i);
    rec.split = static_cast<Split>(split);
    rec.vector.resize(dimension);
    for (auto& v : rec.vector) v = r.le<float>("vector", i);
    records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw DataError(std::to_string(r.remaining()) + " trailing bytes after record " + std::to_string(count), count);
  }
  return EmbeddingStore(dimension, std::move(records), std::move(labels));
}

EmbeddingStore parse_store_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.emplace_back(trim(cell));
  }
  if (header.size() < 4 || header[0] != "record_id" || header[1] != "label_id" || header[2] != "split") {
    throw DataError("CSV header must be record_id,label_id,split,v0,...", 0);
  }
  const std::size_t dimension = header.size() - 3;

  std::vector<EmbeddingRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != dimension + 3) {
      throw DataError("dimension mismatch at row " + std::to_string(row) + ": expected " + std::to_string(dimension) +
                          " components, got " + std::to_string(cells.size() < 3 ? 0 : cells.size() - 3),
                      row);
    }
    auto parse_uint = [&](std::string_view cell, auto& out, const char* what) {
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw DataError("bad " + std::string(what) + " '" + std::string(cell) + "' at row " + std::to_string(row), row);
      }
    };
    EmbeddingRecord rec;
    parse_uint(cells[0], rec.record_id, "record_id");
    parse_uint(cells[1], rec.label_id, "label_id");
    try {
      rec.split = parse_split(cells[2]);
    } catch (const Error&) {
      throw DataError("bad split '" + std::string(cells[2]) + "' at row " + std::to_string(row), row);
    }
    rec.vector.reserve(dimension);
    for (std::size_t j = 0; j < dimension; ++j) {
      const std::string cell(cells[3 + j]);
      char* end = nullptr;
      const float v = std::strtof(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw DataError("bad component v" + std::to_string(j) + " at row " + std::to_string(row), row);
      }
      if (!std::isfinite(v)) {
        throw DataError("non-finite component v" + std::to_string(j) + " at row " + std::to_string(row), row);
      }
      rec.vector.push_back(v);
    }
    records.push_back(std::move(rec));
  }

  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen.insert(records[i].record_id).second) {
      throw DataError("duplicate record_id " + std::to_string(records[i].record_id) + " at row " +
                          std::to_string(i + 1),
                      i + 1);
    }
  }
  auto labels = default_label_map(records);
  return EmbeddingStore(dimension, std::move(records), std::move(labels));
}

EmbeddingStore load_store(const std::filesystem::path& path, StoreFormat format) {
  const auto bytes = read_file(path);
  if (format == StoreFormat::Csv) {
    return parse_store_csv({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  }
  return decode_store(bytes);
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  write_file(path, encode_store(store));
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0)) throw ZeroNormError("cannot normalize a zero-norm vector");
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

std::vector<float> l2_normalize(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0)) throw ZeroNormError("cannot normalize a zero-norm vector");
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::map<std::uint32_t, std::size_t> class_counts(const EmbeddingStore& store, SplitSet splits) {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& r : store.records()) {
    if (splits.contains(r.split)) ++counts[r.label_id];
  }
  return counts;
}

}  // namespace protoclass
