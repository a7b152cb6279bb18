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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instmatch/adapter.hpp"
#include "instmatch/container.hpp"
#include "instmatch/embedding.hpp"
#include "instmatch/evaluation.hpp"
#include "instmatch/matcher.hpp"
#include "instmatch/synth.hpp"

// Container layouts used by the command-line tools.
//
// Templates: "instance_ids" [N], "grids/patches" [N,K,H,W,C],
// "grids/foreground" u8 [N,K,H,W] and/or "embeddings" [N,K,C].
// Queries: "image_ids" [Q], "boxes" [Q,4], "grids/patches" [Q,H,W,C],
// "grids/foreground" u8 [Q,H,W] and/or "embeddings" [Q,C], plus one u8 raster
// per proposal named "mask/<q>". When "embeddings" is present it is used in
// place of pooling the grids.

namespace instmatch {

inline constexpr const char* kRefinedMarker = "refined";

struct TemplateData {
  std::vector<std::int64_t> instance_ids;
  std::size_t views = 0;
  std::vector<PatchGrid> grids;        // instance-major N*K, may be empty
  std::vector<Embedding> embeddings;   // instance-major N*K
  bool refined = false;

  TemplateSet template_set() const;
};

struct QueryData {
  std::vector<std::int64_t> image_ids;
  std::vector<Box> boxes;
  std::vector<PatchGrid> grids;        // may be empty
  std::vector<Embedding> embeddings;
  std::vector<std::string> mask_names; // "mask/<q>" when present, else empty strings
  bool refined = false;

  std::size_t size() const { return image_ids.size(); }
};

TensorContainer templates_to_container(std::span<const std::int64_t> instance_ids,
                                       std::size_t views, std::span<const PatchGrid> grids);
TemplateData templates_from_container(const TensorContainer& c);

TensorContainer queries_to_container(std::span<const SynthQuery> queries);
QueryData queries_from_container(const TensorContainer& c);

/// Masks referenced by records, keyed by the record's mask name.
TensorContainer ground_truth_masks(const GroundTruthSet& gt);

struct SynthPaths {
  std::filesystem::path templates;
  std::filesystem::path queries;
  std::filesystem::path ground_truth;
  std::filesystem::path ground_truth_masks;
};

/// Writes templates.nids, queries.nids, gt.tsv and gt_masks.nids into dir.
SynthPaths write_synth(const SynthDataset& data, const std::filesystem::path& dir);

TensorContainer adapter_to_container(const Adapter& adapter);
Adapter adapter_from_container(const TensorContainer& c);

/// Applies the adapter to "embeddings" (pooling grids first when absent) and
/// marks the result as refined. Other records are copied unchanged.
TensorContainer refine_container(const Adapter& adapter, const TensorContainer& in);

/// Scores every proposal against every instance, assigns within each image
/// and drops proposals below delta or left unassigned. The appearance bonus
/// always uses the raw grids.
std::vector<LabeledProposal> match_queries(const TemplateData& templates, const QueryData& queries,
                                           const std::optional<Adapter>& adapter,
                                           const MatcherConfig& cfg);

/// Fills in the rasters of records whose mask name is found in `masks`.
/// Throws kMissingRecord when a record names a mask that is absent.
void attach_masks(std::span<LabeledProposal> records, const TensorContainer& masks);

void write_loss_csv(const std::filesystem::path& path, std::span<const double> loss_history);

/// JSON object with ap, ap50, ap75, the per-threshold values and counts.
std::string ap_report_json(const ApResult& result, EvalMode mode, std::size_t predictions,
                           std::size_t ground_truth);

EvalMode parse_eval_mode(std::string_view text);

}  // namespace instmatch
