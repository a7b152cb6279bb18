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
#include <optional>
#include <utility>
#include <vector>

#include "instmatch/embedding.hpp"
#include "instmatch/evaluation.hpp"
#include "instmatch/region.hpp"

namespace instmatch {

/// Desk-scale stand-in for a real template/scene dataset.
struct SynthConfig {
  std::size_t num_instances = 20;
  std::size_t templates_per_instance = 8;
  std::size_t dim = 64;
  /// Per-channel standard deviation of the view noise.
  double sigma = 0.2;
  /// Channels spanned by the prototypes; the rest carry only noise.
  /// 0 = all channels.
  std::size_t informative_channels = 16;
  std::size_t distractors_per_image = 1;
  /// Fraction of instances generated as near-duplicate pairs.
  double confusable_fraction = 0.5;
  double confusable_cosine = 0.96;
  /// Channels carrying the difference within a confusable pair; 0 = a quarter
  /// of the informative channels.
  std::size_t confusable_channels = 0;
  std::size_t num_images = 20;
  std::size_t objects_per_image = 5;
  std::size_t grid_size = 4;
  std::size_t image_size = 64;
  /// Patch-to-patch spread inside a foreground region, relative to sigma.
  double patch_jitter = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthQuery {
  std::int64_t image_id = 0;
  PatchGrid grid;
  Box box;
  Mask mask;
  std::optional<std::int64_t> instance_id;  // nullopt for distractors
};

struct SynthDataset {
  std::vector<Embedding> prototypes;
  std::vector<std::pair<std::size_t, std::size_t>> confusable_pairs;
  std::vector<std::int64_t> instance_ids;
  std::vector<PatchGrid> template_grids;  // instance-major N*K
  TemplateSet templates;                  // FFA of template_grids
  std::vector<SynthQuery> queries;
  GroundTruthSet ground_truth;
};

/// Deterministic in cfg.seed. Unit prototypes; confusable pairs are rotations
/// of one prototype toward a sparse orthogonal direction; views add noise and
/// are rendered into patch grids whose foreground mean equals the view.
SynthDataset gen_synth(const SynthConfig& cfg);

}  // namespace instmatch
