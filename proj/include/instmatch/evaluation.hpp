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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "instmatch/matcher.hpp"
#include "instmatch/region.hpp"

namespace instmatch {

enum class EvalMode { kBox, kMask };

struct GroundTruthObject {
  std::int64_t image_id = 0;
  std::int64_t instance_id = 0;
  Box box;
  std::string mask_name;
  Mask mask;
};

struct GroundTruthSet {
  std::vector<GroundTruthObject> objects;
  std::vector<std::int64_t> image_ids;
};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline constexpr std::size_t kNumIouThresholds = 10;
/// Recall grid 0.00, 0.01, ..., 1.00 for interpolated precision.
inline constexpr std::size_t kNumRecallPoints = 101;

double iou_threshold(std::size_t index);

struct ApResult {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::array<double, kNumIouThresholds> ap_per_threshold{};
  /// Interpolated precision on the recall grid, averaged over instance ids,
  /// one curve per IoU threshold.
  std::vector<std::vector<double>> precision;
};

/// Throws kInvalidBox unless both boxes have min < max.
double iou_box(const Box& a, const Box& b);

/// |a & b| / |a | b|. Throws kDimMismatch on differing extents and
/// kEmptyUnion when both masks are empty.
double iou_mask(const Mask& a, const Mask& b);

/// COCO-style AP: per instance id and IoU threshold, predictions are taken in
/// descending score order and greedily matched to the highest-IoU unmatched
/// ground truth of the same id in the same image. Precision is interpolated
/// at 101 recall points, averaged over ids that have ground truth, then over
/// thresholds.
ApResult compute_ap(std::span<const LabeledProposal> predictions, const GroundTruthSet& gt,
                    EvalMode mode);

}  // namespace instmatch
