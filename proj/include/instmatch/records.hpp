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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "instmatch/evaluation.hpp"
#include "instmatch/matcher.hpp"

namespace instmatch {

// One record per line, tab-separated:
//   image_id  instance_id  score  x_min  y_min  x_max  y_max  mask_record_name
// instance_id is -1 for an unlabeled proposal. Blank lines and lines starting
// with '#' are skipped.

void write_records(std::ostream& out, std::span<const LabeledProposal> records);
void write_records(const std::filesystem::path& path, std::span<const LabeledProposal> records);

/// Throws kCorruptRecord naming the offending line.
std::vector<LabeledProposal> read_records(std::istream& in);
std::vector<LabeledProposal> read_records(const std::filesystem::path& path);

/// Ground truth shares the record schema; the score column is ignored.
GroundTruthSet ground_truth_from_records(std::span<const LabeledProposal> records);
std::vector<LabeledProposal> ground_truth_to_records(const GroundTruthSet& gt);

}  // namespace instmatch
