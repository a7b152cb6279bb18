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

#include <doctest.h>

#include <cmath>
#include <random>

#include "instmatch/error.hpp"
#include "instmatch/evaluation.hpp"
#include "oracles.hpp"

using namespace instmatch;

namespace {

LabeledProposal pred(std::int64_t image, std::int64_t id, double score, Box b) {
  LabeledProposal p;
  p.image_id = image;
  p.instance_id = id;
  p.score = score;
  p.box = b;
  return p;
}

GroundTruthSet gt_of(std::vector<GroundTruthObject> objects) {
  GroundTruthSet gt;
  for (const auto& o : objects) {
    if (std::find(gt.image_ids.begin(), gt.image_ids.end(), o.image_id) == gt.image_ids.end()) {
      gt.image_ids.push_back(o.image_id);
    }
  }
  gt.objects = std::move(objects);
  return gt;
}

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 10.0);
  std::uniform_real_distribution<double> size(1.0, 6.0);
  const double x = pos(rng);
  const double y = pos(rng);
  return {x, y, x + size(rng), y + size(rng)};
}

}  // namespace

TEST_CASE("iou_box") {
  const Box a{0, 0, 1, 1};
  CHECK(iou_box(a, a) == 1.0);
  CHECK(iou_box(a, {2, 2, 3, 3}) == 0.0);
  CHECK(iou_box(a, {1, 0, 2, 1}) == 0.0);  // touching edges
  CHECK(std::fabs(iou_box(a, {0.5, 0, 1.5, 1}) - 1.0 / 3.0) <= 1e-9);
  CHECK_THROWS_AS(iou_box({1, 0, 0, 1}, a), Error);
  CHECK_THROWS_AS(iou_box(a, {0, 0, 1, 0}), Error);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const Box x = random_box(rng);
    const Box y = random_box(rng);
    CHECK(iou_box(x, y) == iou_box(y, x));
    CHECK(iou_box(x, y) >= 0.0);
    CHECK(iou_box(x, y) <= 1.0);
    CHECK(iou_box(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("iou_mask") {
  const Mask a = Mask::filled_box(4, 4, {0, 0, 2, 2});
  const Mask b = Mask::filled_box(4, 4, {2, 2, 4, 4});
  CHECK(iou_mask(a, a) == 1.0);
  CHECK(iou_mask(a, b) == 0.0);
  const Mask empty{4, 4, std::vector<std::uint8_t>(16, 0)};
  try {
    iou_mask(empty, empty);
    FAIL("expected EmptyUnion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyUnion);
  }
  CHECK_THROWS_AS(iou_mask(a, Mask::filled_box(4, 5, {0, 0, 2, 2})), Error);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Mask x{10, 10, std::vector<std::uint8_t>(100)};
    Mask y{10, 10, std::vector<std::uint8_t>(100)};
    int inter = 0, uni = 0;
    for (int i = 0; i < 100; ++i) {
      x.bits[i] = static_cast<std::uint8_t>(rng() % 2);
      y.bits[i] = static_cast<std::uint8_t>((rng() % 3) * 100);  // any non-zero is set
      inter += (x.bits[i] && y.bits[i]) ? 1 : 0;
      uni += (x.bits[i] || y.bits[i]) ? 1 : 0;
    }
    if (uni == 0) continue;
    CHECK(iou_mask(x, y) == static_cast<double>(inter) / uni);
  }
}

TEST_CASE("AP of perfect and empty predictions") {
  const auto gt = gt_of({{0, 1, {0, 0, 5, 5}, "", {}}, {0, 2, {6, 6, 9, 9}, "", {}},
                         {1, 1, {1, 1, 4, 4}, "", {}}});
  std::vector<LabeledProposal> perfect;
  for (const auto& o : gt.objects) perfect.push_back(pred(o.image_id, o.instance_id, 1.0, o.box));
  const auto r = compute_ap(perfect, gt, EvalMode::kBox);
  CHECK(r.ap == 1.0);
  CHECK(r.ap50 == 1.0);
  CHECK(r.ap75 == 1.0);
  const auto none = compute_ap({}, gt, EvalMode::kBox);
  CHECK(none.ap == 0.0);
  CHECK(none.ap50 == 0.0);
  CHECK(compute_ap(perfect, GroundTruthSet{}, EvalMode::kBox).ap == 0.0);
}

TEST_CASE("a lower-scored false positive after the true positive keeps AP50 at one") {
  const auto gt = gt_of({{0, 1, {0, 0, 4, 4}, "", {}}});
  const std::vector<LabeledProposal> preds = {pred(0, 1, 0.9, {0, 0, 4, 4}),
                                              pred(0, 1, 0.8, {10, 10, 12, 12})};
  const auto r = compute_ap(preds, gt, EvalMode::kBox);
  CHECK(r.ap50 == 1.0);
  for (double p : r.precision[0]) CHECK(p == 1.0);
}

TEST_CASE("a higher-scored false positive halves the precision") {
  const auto gt = gt_of({{0, 1, {0, 0, 4, 4}, "", {}}});
  const std::vector<LabeledProposal> preds = {pred(0, 1, 0.9, {10, 10, 12, 12}),
                                              pred(0, 1, 0.8, {0, 0, 4, 4})};
  CHECK(compute_ap(preds, gt, EvalMode::kBox).ap50 == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("predictions only match ground truth of the same id and image") {
  const auto gt = gt_of({{0, 1, {0, 0, 4, 4}, "", {}}});
  CHECK(compute_ap(std::vector<LabeledProposal>{pred(0, 2, 1.0, {0, 0, 4, 4})}, gt, EvalMode::kBox).ap == 0.0);
  CHECK(compute_ap(std::vector<LabeledProposal>{pred(1, 1, 1.0, {0, 0, 4, 4})}, gt, EvalMode::kBox).ap == 0.0);
}

TEST_CASE("AP falls across IoU thresholds for a partially overlapping box") {
  const auto gt = gt_of({{0, 1, {0, 0, 10, 10}, "", {}}});
  // IoU = 0.7: true positive up to threshold 0.70, missed from 0.75.
  const auto r = compute_ap(std::vector<LabeledProposal>{pred(0, 1, 1.0, {0, 0, 10, 7})}, gt, EvalMode::kBox);
  for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
    CHECK(r.ap_per_threshold[t] == (iou_threshold(t) <= 0.7 + 1e-12 ? 1.0 : 0.0));
  }
  CHECK(r.ap50 == 1.0);
  CHECK(r.ap75 == 0.0);
  CHECK(r.ap == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mask mode uses mask IoU") {
  GroundTruthObject g{0, 1, {0, 0, 8, 8}, "gt/0", Mask::filled_box(8, 8, {0, 0, 8, 8})};
  const auto gt = gt_of({g});
  auto p = pred(0, 1, 1.0, {0, 0, 8, 8});
  p.mask = Mask::filled_box(8, 8, {0, 0, 8, 4});  // half the pixels
  CHECK(compute_ap(std::vector<LabeledProposal>{p}, gt, EvalMode::kBox).ap == 1.0);
  const auto r = compute_ap(std::vector<LabeledProposal>{p}, gt, EvalMode::kMask);
  CHECK(r.ap50 == 1.0);
  CHECK(r.ap_per_threshold[1] == 0.0);
  p.mask = Mask{};
  CHECK_THROWS_AS(compute_ap(std::vector<LabeledProposal>{p}, gt, EvalMode::kMask), Error);
}

TEST_CASE("AP agrees with the brute-force evaluator on random small scenes") {
  std::mt19937_64 rng(3);
  for (int scene = 0; scene < 300; ++scene) {
    const int n_gt = 1 + static_cast<int>(rng() % 5);
    const int n_pred = static_cast<int>(rng() % 11);
    std::vector<GroundTruthObject> objects;
    std::vector<oracle::Det> gdets;
    for (int i = 0; i < n_gt; ++i) {
      const auto b = random_box(rng);
      const std::int64_t image = static_cast<std::int64_t>(rng() % 2);
      const std::int64_t id = static_cast<std::int64_t>(rng() % 3);
      objects.push_back({image, id, b, "", {}});
      gdets.push_back({image, id, 1.0, b.x_min, b.y_min, b.x_max, b.y_max});
    }
    std::vector<LabeledProposal> preds;
    std::vector<oracle::Det> pdets;
    std::uniform_real_distribution<double> jitter(-0.4, 0.4);
    for (int i = 0; i < n_pred; ++i) {
      Box b = random_box(rng);
      std::int64_t image = static_cast<std::int64_t>(rng() % 2);
      std::int64_t id = static_cast<std::int64_t>(rng() % 3);
      if (rng() % 2 == 0) {  // perturbed copy of a ground truth box
        const auto& g = objects[rng() % objects.size()];
        b = {g.box.x_min + jitter(rng), g.box.y_min + jitter(rng), g.box.x_max + jitter(rng),
             g.box.y_max + jitter(rng)};
        image = g.image_id;
        id = g.instance_id;
      }
      const double score = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      preds.push_back(pred(image, id, score, b));
      pdets.push_back({image, id, score, b.x_min, b.y_min, b.x_max, b.y_max});
    }
    const auto r = compute_ap(preds, gt_of(objects), EvalMode::kBox);
    double mean = 0;
    for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
      const double expected = oracle::brute_force_ap(pdets, gdets, iou_threshold(t));
      CHECK(std::fabs(r.ap_per_threshold[t] - expected) <= 1e-9);
      mean += expected;
    }
    CHECK(std::fabs(r.ap - mean / kNumIouThresholds) <= 1e-9);
    CHECK(r.ap >= 0.0);
    CHECK(r.ap <= r.ap50 + 1e-12);
    CHECK(r.ap50 <= 1.0);

    // Ranking-only dependence: a positive rescale of every score changes nothing.
    auto scaled = preds;
    for (auto& p : scaled) p.score *= 3.7;
    CHECK(compute_ap(scaled, gt_of(objects), EvalMode::kBox).ap == r.ap);
  }
}
