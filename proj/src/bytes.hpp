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

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "protoclass/error.hpp"

namespace protoclass::detail {

template <typename T>
using RawBits = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                   std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;

class ByteWriter {
 public:
  void bytes(std::span<const unsigned char> data) { out_.insert(out_.end(), data.begin(), data.end()); }

  template <typename T>
  void le(T value) {
    using U = RawBits<T>;
    const auto raw = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<unsigned char>((raw >> (8 * i)) & 0xFFU));
    }
  }

  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> data) : data_(data) {}

  std::span<const unsigned char> bytes(std::size_t n, std::string_view what,
                                       std::optional<std::size_t> record = std::nullopt) {
    if (data_.size() - offset_ < n) {
      std::string msg = "truncated file: expected " + std::to_string(n) + " bytes of " +
                        std::string(what) + " at byte offset " + std::to_string(offset_);
      if (record) msg += ", record " + std::to_string(*record);
      throw DataError(msg, record);
    }
    auto out = data_.subspan(offset_, n);
    offset_ += n;
    return out;
  }

  template <typename T>
  T le(std::string_view what, std::optional<std::size_t> record = std::nullopt) {
    using U = RawBits<T>;
    auto raw = bytes(sizeof(T), what, record);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<U>(static_cast<U>(raw[i]) << (8 * i));
    return std::bit_cast<T>(value);
  }

  std::size_t remaining() const { return data_.size() - offset_; }

 private:
  std::span<const unsigned char> data_;
  std::size_t offset_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace protoclass::detail
