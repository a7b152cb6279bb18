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
#include <span>
#include <string>
#include <vector>

#include "instmatch/embedding.hpp"
#include "instmatch/region.hpp"

namespace instmatch {

/// Row-major rows x cols matrix of scores.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c, std::vector<double> v);
  static ScoreMatrix zeros(std::size_t r, std::size_t c) {
    return ScoreMatrix(r, c, std::vector<double>(r * c, 0.0));
  }

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

/// Q x N x K proposal/template cosine scores and their Q x N reduction.
struct ScoreTensor {
  std::size_t queries = 0;
  std::size_t instances = 0;
  std::size_t views = 0;
  std::vector<double> template_scores;
  ScoreMatrix instance_scores;

  double template_score(std::size_t q, std::size_t n, std::size_t k) const {
    return template_scores[(q * instances + n) * views + k];
  }
  /// View with the highest template score for (q, n); lowest index on ties.
  std::size_t best_view(std::size_t q, std::size_t n) const;
};

enum class Aggregation { kMax, kAvgTopK };
enum class Assignment { kStable, kArgmax };

struct MatcherConfig {
  Aggregation aggregation = Aggregation::kMax;
  /// Used by kAvgTopK; clamped to K at aggregation time.
  std::size_t avg_k = 5;
  Assignment assignment = Assignment::kStable;
  double delta = 0.0;
  bool use_appearance_bonus = false;

  void validate() const;
};

ScoreTensor score_templates(std::span<const Embedding> proposals, const TemplateSet& templates);

/// Fills instance_scores: max over K, or the mean of the k largest.
ScoreTensor aggregate(ScoreTensor scores, const MatcherConfig& cfg);

/// Mean over foreground proposal patches of the best patch cosine against the
/// foreground template patches.
double appearance_score(const PatchGrid& proposal, const PatchGrid& best_template);

/// Q x N appearance scores, each against the best template view of instance n.
/// `template_grids` is instance-major N*K.
ScoreMatrix appearance_scores(std::span<const PatchGrid> proposal_grids,
                              std::span<const PatchGrid> template_grids,
                              const ScoreTensor& scores);

/// instance_scores <- (instance_scores + s_appe) / 2
ScoreTensor apply_bonus(ScoreTensor scores, const ScoreMatrix& appearance);

struct InstanceAssignment {
  std::optional<std::size_t> instance;  // column index; nullopt when unmatched
  double score = 0.0;
};

/// Proposal-proposing Gale-Shapley. Both sides rank by the shared matrix;
/// ties go to the lower instance index, then the lower proposal index.
std::vector<InstanceAssignment> assign_stable(const ScoreMatrix& scores);

/// Per-row argmax, lowest index on ties.
std::vector<InstanceAssignment> assign_argmax(const ScoreMatrix& scores);

struct LabeledProposal {
  std::int64_t image_id = 0;
  Box box;
  std::string mask_name;
  Mask mask;  // may be left empty when only the name is carried
  std::optional<std::int64_t> instance_id;
  double score = 0.0;
};

/// Throws kInvalidBox for a degenerate box or a mask outside it.
void validate(const LabeledProposal& proposal);

/// Keeps labeled proposals with score >= delta.
std::vector<LabeledProposal> threshold_filter(std::vector<LabeledProposal> proposals,
                                              double delta);

}  // namespace instmatch
