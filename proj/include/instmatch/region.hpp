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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace instmatch {

/// Axis-aligned box in pixel coordinates.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const;
  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool operator==(const Box&) const = default;
};

/// Binary raster, row-major, one byte per pixel (non-zero = set).
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  static Mask filled_box(std::size_t height, std::size_t width, const Box& box);

  bool is_raster() const { return height > 0 && width > 0; }
  std::size_t count() const;
  /// True when every set pixel center lies inside the box.
  bool within(const Box& box) const;
  bool operator==(const Mask&) const = default;
};

}  // namespace instmatch
