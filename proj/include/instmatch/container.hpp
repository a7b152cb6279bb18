// Copyright 2026 The instmatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <string>
#include <string_view>
#include <vector>

namespace instmatch {

// Byte layout (all integers little-endian):
//   "NIDS" | u32 version (=1) | u32 record count
//   per record: u32 name length | name (UTF-8) | u8 dtype | u8 ndim |
//               u64 dims[ndim] | data (row-major, product(dims) * dtype size bytes)

inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1, kUInt8 = 2 };

std::size_t dtype_size(DType dtype);

struct TensorRecord {
  std::string name;
  DType dtype = DType::kFloat32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> data;  // little-endian element bytes

  std::uint64_t element_count() const;

  /// Widens any dtype to double.
  std::vector<double> to_f64() const;
  /// Throws kUnknownDtype unless the record holds uint8.
  std::vector<std::uint8_t> to_u8() const;

  static TensorRecord from_f64(std::string name, std::vector<std::uint64_t> dims,
                               std::span<const double> values, DType storage = DType::kFloat32);
  static TensorRecord from_u8(std::string name, std::vector<std::uint64_t> dims,
                              std::span<const std::uint8_t> values);

  bool operator==(const TensorRecord&) const = default;
};

class TensorContainer {
 public:
  /// Throws kDuplicateName if the name is taken.
  void add(TensorRecord record);
  /// Adds or overwrites by name.
  void put(TensorRecord record);

  const TensorRecord* find(std::string_view name) const;
  /// Throws kMissingRecord.
  const TensorRecord& get(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::span<const TensorRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  std::vector<std::uint8_t> serialize() const;
  /// Rejects bad magic, unsupported versions, truncation, unknown dtypes,
  /// inconsistent lengths, duplicate names and trailing bytes.
  static TensorContainer parse(std::span<const std::uint8_t> bytes);

  void write_file(const std::filesystem::path& path) const;
  static TensorContainer read_file(const std::filesystem::path& path);

  bool operator==(const TensorContainer&) const = default;

 private:
  std::vector<TensorRecord> records_;
};

}  // namespace instmatch
