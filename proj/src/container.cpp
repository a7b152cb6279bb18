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

#include "instmatch/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "instmatch/error.hpp"

namespace instmatch {
namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'I', 'D', 'S'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kTruncatedFile, std::string("file ends inside ") + what);
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T read(const char* what) {
    return get_le<T>(take(sizeof(T), what));
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool known_dtype(std::uint8_t code) { return code <= 2; }

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kFloat64: return 8;
    case DType::kUInt8: return 1;
  }
  throw Error(ErrorCode::kUnknownDtype, "unknown dtype");
}

std::uint64_t TensorRecord::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<double> TensorRecord::to_f64() const {
  const std::uint64_t n = element_count();
  std::vector<double> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    switch (dtype) {
      case DType::kFloat32:
        out[i] = std::bit_cast<float>(get_le<std::uint32_t>(data.data() + 4 * i));
        break;
      case DType::kFloat64:
        out[i] = std::bit_cast<double>(get_le<std::uint64_t>(data.data() + 8 * i));
        break;
      case DType::kUInt8:
        out[i] = data[i];
        break;
    }
  }
  return out;
}

std::vector<std::uint8_t> TensorRecord::to_u8() const {
  if (dtype != DType::kUInt8) {
    throw Error(ErrorCode::kUnknownDtype, "record '" + name + "' is not uint8");
  }
  return data;
}

TensorRecord TensorRecord::from_f64(std::string name, std::vector<std::uint64_t> dims,
                                    std::span<const double> values, DType storage) {
  TensorRecord r{std::move(name), storage, std::move(dims), {}};
  if (r.element_count() != values.size()) {
    throw Error(ErrorCode::kDimMismatch, "record '" + r.name + "' dims do not match value count");
  }
  r.data.reserve(values.size() * dtype_size(storage));
  for (double v : values) {
    switch (storage) {
      case DType::kFloat32:
        put_le(r.data, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        break;
      case DType::kFloat64:
        put_le(r.data, std::bit_cast<std::uint64_t>(v));
        break;
      case DType::kUInt8:
        r.data.push_back(static_cast<std::uint8_t>(v));
        break;
    }
  }
  return r;
}

TensorRecord TensorRecord::from_u8(std::string name, std::vector<std::uint64_t> dims,
                                   std::span<const std::uint8_t> values) {
  TensorRecord r{std::move(name), DType::kUInt8, std::move(dims),
                 std::vector<std::uint8_t>(values.begin(), values.end())};
  if (r.element_count() != values.size()) {
    throw Error(ErrorCode::kDimMismatch, "record '" + r.name + "' dims do not match value count");
  }
  return r;
}

void TensorContainer::add(TensorRecord record) {
  if (contains(record.name)) {
    throw Error(ErrorCode::kDuplicateName, "record '" + record.name + "' already exists");
  }
  records_.push_back(std::move(record));
}

void TensorContainer::put(TensorRecord record) {
  for (auto& r : records_) {
    if (r.name == record.name) {
      r = std::move(record);
      return;
    }
  }
  records_.push_back(std::move(record));
}

const TensorRecord* TensorContainer::find(std::string_view name) const {
  for (const auto& r : records_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const TensorRecord& TensorContainer::get(std::string_view name) const {
  const TensorRecord* r = find(name);
  if (r == nullptr) {
    throw Error(ErrorCode::kMissingRecord, "no record named '" + std::string(name) + "'");
  }
  return *r;
}

std::vector<std::uint8_t> TensorContainer::serialize() const {
  if (records_.empty()) throw Error(ErrorCode::kInvalidArgument, "container has no records");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) {
    if (r.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "record '" + r.name + "' has too many dims");
    }
    if (r.data.size() != r.element_count() * dtype_size(r.dtype)) {
      throw Error(ErrorCode::kCorruptRecord, "record '" + r.name + "' byte length mismatch");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(static_cast<std::uint8_t>(r.dtype));
    out.push_back(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) put_le<std::uint64_t>(out, d);
    out.insert(out.end(), r.data.begin(), r.data.end());
  }
  return out;
}

TensorContainer TensorContainer::parse(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::uint8_t* magic = in.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::kBadMagic, "not a NIDS container");
  const auto version = in.read<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "container version " + std::to_string(version));
  }
  const auto count = in.read<std::uint32_t>("record count");
  TensorContainer c;
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord r;
    const auto name_len = in.read<std::uint32_t>("name length");
    const std::uint8_t* name = in.take(name_len, "record name");
    r.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto code = in.read<std::uint8_t>("dtype");
    if (!known_dtype(code)) {
      throw Error(ErrorCode::kUnknownDtype, "dtype code " + std::to_string(code));
    }
    r.dtype = static_cast<DType>(code);
    const auto ndim = in.read<std::uint8_t>("ndim");
    std::uint64_t expected = dtype_size(r.dtype);
    bool overflow = false;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim = in.read<std::uint64_t>("dims");
      r.dims.push_back(dim);
      if (dim != 0 && expected > std::numeric_limits<std::uint64_t>::max() / dim) overflow = true;
      expected *= dim;
    }
    if (overflow) {
      throw Error(ErrorCode::kCorruptRecord, "record '" + r.name + "' dims overflow");
    }
    if (expected > in.remaining()) {
      throw Error(ErrorCode::kTruncatedFile, "record '" + r.name + "' data is cut short");
    }
    const std::uint8_t* data = in.take(static_cast<std::size_t>(expected), "record data");
    r.data.assign(data, data + expected);
    c.add(std::move(r));
  }
  if (in.remaining() != 0) throw Error(ErrorCode::kCorruptRecord, "trailing bytes after last record");
  return c;
}

void TensorContainer::write_file(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

TensorContainer TensorContainer::read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace instmatch
