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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace protoclass {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data. `position()` is the offending record or
/// row when one can be named (0-based record index for binary files, 1-based
/// data row for CSV).
class DataError : public Error {
 public:
  DataError(const std::string& what, std::optional<std::size_t> position = std::nullopt)
      : Error(what), position_(position) {}

  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  std::optional<std::size_t> position_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  using Error::Error;
};

class InsufficientClassesError : public Error {
 public:
  InsufficientClassesError(std::size_t ways, std::size_t eligible)
      : Error("episode needs " + std::to_string(ways) + " classes but only " +
              std::to_string(eligible) + " are eligible"),
        ways_(ways),
        eligible_(eligible) {}

  std::size_t ways() const noexcept { return ways_; }
  std::size_t eligible() const noexcept { return eligible_; }

 private:
  std::size_t ways_;
  std::size_t eligible_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace protoclass
