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
#include <span>
#include <vector>

namespace instmatch {

/// Norms below this are treated as zero by every cosine routine.
inline constexpr double kZeroNormTolerance = 1e-12;

/// A C-dimensional feature vector. Values are kept at raw scale; cosine
/// routines normalize internally.
class Embedding {
 public:
  Embedding() = default;
  /// Throws kInvalidArgument on an empty vector and kNonFinite on NaN/Inf.
  explicit Embedding(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

/// Grid of patch embeddings with a foreground mask, stored row-major as
/// height x width x dim.
class PatchGrid {
 public:
  PatchGrid() = default;
  PatchGrid(std::size_t height, std::size_t width, std::size_t dim,
            std::vector<double> patches, std::vector<std::uint8_t> foreground);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return height_ * width_; }

  std::span<const double> patch(std::size_t index) const {
    return {patches_.data() + index * dim_, dim_};
  }
  std::span<const double> patch(std::size_t row, std::size_t col) const {
    return patch(row * width_ + col);
  }
  bool is_foreground(std::size_t index) const { return foreground_[index] != 0; }
  std::size_t foreground_count() const noexcept;

  std::span<const double> patches() const noexcept { return patches_; }
  std::span<const std::uint8_t> foreground() const noexcept { return foreground_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> patches_;
  std::vector<std::uint8_t> foreground_;
};

/// N instances x K template embeddings, instance-major.
class TemplateSet {
 public:
  TemplateSet() = default;
  TemplateSet(std::vector<std::int64_t> instance_ids, std::size_t templates_per_instance,
              std::vector<Embedding> embeddings);

  std::size_t num_instances() const noexcept { return instance_ids_.size(); }
  std::size_t templates_per_instance() const noexcept { return per_instance_; }
  std::size_t dim() const noexcept { return embeddings_.empty() ? 0 : embeddings_.front().dim(); }

  const Embedding& at(std::size_t instance, std::size_t view) const {
    return embeddings_[instance * per_instance_ + view];
  }
  std::span<const Embedding> embeddings() const noexcept { return embeddings_; }
  std::span<const std::int64_t> instance_ids() const noexcept { return instance_ids_; }

 private:
  std::vector<std::int64_t> instance_ids_;
  std::size_t per_instance_ = 0;
  std::vector<Embedding> embeddings_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Mean of the foreground patch embeddings. Throws kEmptyForeground when the
/// mask selects nothing.
Embedding ffa_pool(const PatchGrid& grid);

/// (q.k) / (|q||k|), clamped to [-1, 1]. Throws kDimMismatch or kZeroVector.
double cosine_similarity(std::span<const double> q, std::span<const double> k);
inline double cosine_similarity(const Embedding& q, const Embedding& k) {
  return cosine_similarity(q.values(), k.values());
}

/// grids[n][k] -> FFA embedding for template k of instance n. Errors name the
/// offending (n, k).
TemplateSet build_template_set(const std::vector<std::vector<PatchGrid>>& grids,
                               std::vector<std::int64_t> instance_ids);

}  // namespace instmatch
