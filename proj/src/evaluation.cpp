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

#include "instmatch/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>

#include "instmatch/error.hpp"

namespace instmatch {

double iou_threshold(std::size_t index) { return static_cast<double>(50 + 5 * index) / 100.0; }

double iou_box(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw Error(ErrorCode::kInvalidBox, "box must satisfy min < max");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double iou_mask(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width || a.bits.size() != b.bits.size()) {
    throw Error(ErrorCode::kDimMismatch, "mask extents differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i] != 0;
    const bool y = b.bits[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) throw Error(ErrorCode::kEmptyUnion, "both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double pair_iou(const LabeledProposal& p, const GroundTruthObject& g, EvalMode mode) {
  if (mode == EvalMode::kBox) return iou_box(p.box, g.box);
  if (!p.mask.is_raster() || !g.mask.is_raster()) {
    throw Error(ErrorCode::kInvalidArgument, "mask evaluation needs rasters on both sides");
  }
  if (p.mask.count() == 0 && g.mask.count() == 0) return 0.0;
  return iou_mask(p.mask, g.mask);
}

// Interpolated precision at each recall grid point for one TP/FP sequence.
std::vector<double> interpolated_precision(const std::vector<bool>& is_tp, std::size_t num_gt) {
  const std::size_t n = is_tp.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  std::vector<double> out(kNumRecallPoints, 0.0);
  for (std::size_t r = 0; r < kNumRecallPoints; ++r) {
    const double target = static_cast<double>(r) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), target);
    if (it != recall.end()) out[r] = precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return out;
}

}  // namespace

ApResult compute_ap(std::span<const LabeledProposal> predictions, const GroundTruthSet& gt,
                    EvalMode mode) {
  ApResult result;
  result.precision.assign(kNumIouThresholds, std::vector<double>(kNumRecallPoints, 0.0));

  std::map<std::int64_t, std::vector<std::size_t>> gt_by_id;
  for (std::size_t g = 0; g < gt.objects.size(); ++g) {
    gt_by_id[gt.objects[g].instance_id].push_back(g);
  }
  if (gt_by_id.empty()) return result;

  for (const auto& [id, gt_indices] : gt_by_id) {
    std::vector<std::size_t> preds;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (predictions[i].instance_id == id) preds.push_back(i);
    }
    std::stable_sort(preds.begin(), preds.end(), [&](std::size_t a, std::size_t b) {
      return predictions[a].score > predictions[b].score;
    });
    // IoU against every same-image ground truth of this id; -1 marks another image.
    std::vector<std::vector<double>> ious(preds.size(), std::vector<double>(gt_indices.size(), -1.0));
    for (std::size_t p = 0; p < preds.size(); ++p) {
      for (std::size_t g = 0; g < gt_indices.size(); ++g) {
        const auto& obj = gt.objects[gt_indices[g]];
        if (obj.image_id == predictions[preds[p]].image_id) {
          ious[p][g] = pair_iou(predictions[preds[p]], obj, mode);
        }
      }
    }
    for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
      const double threshold = iou_threshold(t);
      std::vector<bool> matched(gt_indices.size(), false);
      std::vector<bool> is_tp(preds.size(), false);
      for (std::size_t p = 0; p < preds.size(); ++p) {
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < gt_indices.size(); ++g) {
          if (matched[g] || ious[p][g] < threshold) continue;
          if (!best || ious[p][g] > ious[p][*best]) best = g;
        }
        if (best) {
          matched[*best] = true;
          is_tp[p] = true;
        }
      }
      const auto curve = interpolated_precision(is_tp, gt_indices.size());
      for (std::size_t r = 0; r < kNumRecallPoints; ++r) result.precision[t][r] += curve[r];
    }
  }
  const double ids = static_cast<double>(gt_by_id.size());
  for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
    for (double& p : result.precision[t]) p /= ids;
    result.ap_per_threshold[t] =
        std::accumulate(result.precision[t].begin(), result.precision[t].end(), 0.0) /
        static_cast<double>(kNumRecallPoints);
  }
  result.ap = std::accumulate(result.ap_per_threshold.begin(), result.ap_per_threshold.end(), 0.0) /
              static_cast<double>(kNumIouThresholds);
  result.ap50 = result.ap_per_threshold[0];
  result.ap75 = result.ap_per_threshold[5];
  return result;
}

}  // namespace instmatch
