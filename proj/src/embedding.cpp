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

#include "instmatch/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "instmatch/error.hpp"

namespace instmatch {

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "embedding must have dim >= 1");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "embedding contains a non-finite value");
    }
  }
}

PatchGrid::PatchGrid(std::size_t height, std::size_t width, std::size_t dim,
                     std::vector<double> patches, std::vector<std::uint8_t> foreground)
    : height_(height),
      width_(width),
      dim_(dim),
      patches_(std::move(patches)),
      foreground_(std::move(foreground)) {
  if (height_ == 0 || width_ == 0 || dim_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "patch grid dimensions must be positive");
  }
  if (patches_.size() != height_ * width_ * dim_) {
    throw Error(ErrorCode::kDimMismatch, "patch buffer size does not match height*width*dim");
  }
  if (foreground_.size() != height_ * width_) {
    throw Error(ErrorCode::kDimMismatch, "foreground mask size does not match grid");
  }
  for (double v : patches_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "patch grid contains a non-finite value");
    }
  }
}

std::size_t PatchGrid::foreground_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(foreground_.begin(), foreground_.end(), [](std::uint8_t m) { return m != 0; }));
}

TemplateSet::TemplateSet(std::vector<std::int64_t> instance_ids,
                         std::size_t templates_per_instance, std::vector<Embedding> embeddings)
    : instance_ids_(std::move(instance_ids)),
      per_instance_(templates_per_instance),
      embeddings_(std::move(embeddings)) {
  if (instance_ids_.empty() || per_instance_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "template set needs N >= 1 and K >= 1");
  }
  if (embeddings_.size() != instance_ids_.size() * per_instance_) {
    throw Error(ErrorCode::kDimMismatch, "template set must hold exactly N*K embeddings");
  }
  std::unordered_set<std::int64_t> seen;
  for (auto id : instance_ids_) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate instance id " + std::to_string(id));
    }
  }
  const std::size_t d = embeddings_.front().dim();
  for (const auto& e : embeddings_) {
    if (e.dim() != d) throw Error(ErrorCode::kDimMismatch, "template dims differ");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Embedding ffa_pool(const PatchGrid& grid) {
  std::vector<double> sum(grid.dim(), 0.0);
  std::size_t count = 0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if (!grid.is_foreground(p)) continue;
    auto patch = grid.patch(p);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += patch[c];
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::kEmptyForeground, "no patch is marked foreground");
  }
  for (double& v : sum) v /= static_cast<double>(count);
  return Embedding(std::move(sum));
}

double cosine_similarity(std::span<const double> q, std::span<const double> k) {
  if (q.size() != k.size()) {
    throw Error(ErrorCode::kDimMismatch, "cosine operands have different dims");
  }
  const double nq = l2_norm(q);
  const double nk = l2_norm(k);
  if (nq < kZeroNormTolerance || nk < kZeroNormTolerance) {
    throw Error(ErrorCode::kZeroVector, "cosine of a zero-norm vector");
  }
  return std::clamp(dot(q, k) / (nq * nk), -1.0, 1.0);
}

TemplateSet build_template_set(const std::vector<std::vector<PatchGrid>>& grids,
                               std::vector<std::int64_t> instance_ids) {
  if (grids.empty() || grids.front().empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one instance and one template");
  }
  if (grids.size() != instance_ids.size()) {
    throw Error(ErrorCode::kDimMismatch, "one instance id per grid row required");
  }
  const std::size_t per_instance = grids.front().size();
  std::vector<Embedding> embeddings;
  embeddings.reserve(grids.size() * per_instance);
  for (std::size_t n = 0; n < grids.size(); ++n) {
    if (grids[n].size() != per_instance) {
      throw Error(ErrorCode::kDimMismatch, "every instance needs the same template count");
    }
    for (std::size_t k = 0; k < per_instance; ++k) {
      try {
        embeddings.push_back(ffa_pool(grids[n][k]));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyForeground) throw;
        throw Error(ErrorCode::kEmptyForeground, "template (" + std::to_string(n) + ", " +
                                                     std::to_string(k) + ") has an empty mask");
      }
    }
  }
  return TemplateSet(std::move(instance_ids), per_instance, std::move(embeddings));
}

}  // namespace instmatch
