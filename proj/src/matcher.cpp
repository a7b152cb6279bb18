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

#include "instmatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <string>

#include "instmatch/error.hpp"

namespace instmatch {

bool Box::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

Mask Mask::filled_box(std::size_t height, std::size_t width, const Box& box) {
  Mask m{height, width, std::vector<std::uint8_t>(height * width, 0)};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double cx = static_cast<double>(x) + 0.5;
      const double cy = static_cast<double>(y) + 0.5;
      if (cx >= box.x_min && cx <= box.x_max && cy >= box.y_min && cy <= box.y_max) {
        m.bits[y * width + x] = 1;
      }
    }
  }
  return m;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(
      std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

bool Mask::within(const Box& box) const {
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (bits[y * width + x] == 0) continue;
      const double cx = static_cast<double>(x) + 0.5;
      const double cy = static_cast<double>(y) + 0.5;
      if (cx < box.x_min || cx > box.x_max || cy < box.y_min || cy > box.y_max) return false;
    }
  }
  return true;
}

ScoreMatrix::ScoreMatrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw Error(ErrorCode::kDimMismatch, "score matrix buffer does not match rows*cols");
  }
}

std::size_t ScoreTensor::best_view(std::size_t q, std::size_t n) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < views; ++k) {
    if (template_score(q, n, k) > template_score(q, n, best)) best = k;
  }
  return best;
}

void MatcherConfig::validate() const {
  if (aggregation == Aggregation::kAvgTopK && avg_k == 0) {
    throw Error(ErrorCode::kConfig, "avg_k must be >= 1");
  }
  if (!std::isfinite(delta)) throw Error(ErrorCode::kConfig, "delta must be finite");
}

ScoreTensor score_templates(std::span<const Embedding> proposals, const TemplateSet& templates) {
  if (proposals.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one proposal");
  ScoreTensor t;
  t.queries = proposals.size();
  t.instances = templates.num_instances();
  t.views = templates.templates_per_instance();
  t.template_scores.resize(t.queries * t.instances * t.views);
  t.instance_scores = ScoreMatrix::zeros(t.queries, t.instances);
  for (std::size_t q = 0; q < t.queries; ++q) {
    if (proposals[q].dim() != templates.dim()) {
      throw Error(ErrorCode::kDimMismatch, "proposal " + std::to_string(q) +
                                               " dim differs from template dim");
    }
    for (std::size_t n = 0; n < t.instances; ++n) {
      for (std::size_t k = 0; k < t.views; ++k) {
        try {
          t.template_scores[(q * t.instances + n) * t.views + k] =
              cosine_similarity(proposals[q], templates.at(n, k));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kZeroVector) throw;
          throw Error(ErrorCode::kZeroVector, "proposal " + std::to_string(q) + " vs template (" +
                                                  std::to_string(n) + ", " + std::to_string(k) +
                                                  ")");
        }
      }
    }
  }
  return t;
}

ScoreTensor aggregate(ScoreTensor scores, const MatcherConfig& cfg) {
  cfg.validate();
  scores.instance_scores = ScoreMatrix::zeros(scores.queries, scores.instances);
  const std::size_t k = std::min(cfg.avg_k, scores.views);
  std::vector<double> row(scores.views);
  for (std::size_t q = 0; q < scores.queries; ++q) {
    for (std::size_t n = 0; n < scores.instances; ++n) {
      for (std::size_t v = 0; v < scores.views; ++v) row[v] = scores.template_score(q, n, v);
      double value;
      if (cfg.aggregation == Aggregation::kMax) {
        value = *std::max_element(row.begin(), row.end());
      } else {
        std::partial_sort(row.begin(), row.begin() + static_cast<long>(k), row.end(),
                          std::greater<>());
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += row[i];
        value = sum / static_cast<double>(k);
      }
      scores.instance_scores.at(q, n) = value;
    }
  }
  return scores;
}

double appearance_score(const PatchGrid& proposal, const PatchGrid& best_template) {
  if (proposal.dim() != best_template.dim()) {
    throw Error(ErrorCode::kDimMismatch, "patch dims differ between proposal and template");
  }
  if (proposal.foreground_count() == 0 || best_template.foreground_count() == 0) {
    throw Error(ErrorCode::kEmptyForeground, "appearance score needs foreground on both grids");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < proposal.size(); ++j) {
    if (!proposal.is_foreground(j)) continue;
    double best = -1.0;
    for (std::size_t i = 0; i < best_template.size(); ++i) {
      if (!best_template.is_foreground(i)) continue;
      best = std::max(best, cosine_similarity(proposal.patch(j), best_template.patch(i)));
    }
    total += best;
    ++count;
  }
  return total / static_cast<double>(count);
}

ScoreMatrix appearance_scores(std::span<const PatchGrid> proposal_grids,
                              std::span<const PatchGrid> template_grids,
                              const ScoreTensor& scores) {
  if (proposal_grids.size() != scores.queries ||
      template_grids.size() != scores.instances * scores.views) {
    throw Error(ErrorCode::kDimMismatch, "grid counts do not match the score tensor");
  }
  ScoreMatrix out = ScoreMatrix::zeros(scores.queries, scores.instances);
  for (std::size_t q = 0; q < scores.queries; ++q) {
    for (std::size_t n = 0; n < scores.instances; ++n) {
      const std::size_t k = scores.best_view(q, n);
      out.at(q, n) = appearance_score(proposal_grids[q], template_grids[n * scores.views + k]);
    }
  }
  return out;
}

ScoreTensor apply_bonus(ScoreTensor scores, const ScoreMatrix& appearance) {
  if (appearance.rows != scores.instance_scores.rows ||
      appearance.cols != scores.instance_scores.cols) {
    throw Error(ErrorCode::kDimMismatch, "appearance matrix shape differs from instance scores");
  }
  for (std::size_t i = 0; i < appearance.values.size(); ++i) {
    scores.instance_scores.values[i] =
        (scores.instance_scores.values[i] + appearance.values[i]) / 2.0;
  }
  return scores;
}

std::vector<InstanceAssignment> assign_stable(const ScoreMatrix& scores) {
  const std::size_t rows = scores.rows;
  const std::size_t cols = scores.cols;
  std::vector<InstanceAssignment> result(rows);
  if (cols == 0) return result;

  std::vector<std::vector<std::size_t>> prefs(rows);
  for (std::size_t q = 0; q < rows; ++q) {
    auto& p = prefs[q];
    p.resize(cols);
    for (std::size_t n = 0; n < cols; ++n) p[n] = n;
    std::stable_sort(p.begin(), p.end(),
                     [&](std::size_t a, std::size_t b) { return scores.at(q, a) > scores.at(q, b); });
  }
  // Instance n prefers q over r when it scores higher, or ties with a lower index.
  auto instance_prefers = [&](std::size_t n, std::size_t q, std::size_t r) {
    const double sq = scores.at(q, n);
    const double sr = scores.at(r, n);
    return sq > sr || (sq == sr && q < r);
  };

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> holder(cols, kNone);
  std::vector<std::size_t> next(rows, 0);
  std::deque<std::size_t> free_rows;
  for (std::size_t q = 0; q < rows; ++q) free_rows.push_back(q);
  while (!free_rows.empty()) {
    const std::size_t q = free_rows.front();
    free_rows.pop_front();
    if (next[q] == cols) continue;
    const std::size_t n = prefs[q][next[q]++];
    if (holder[n] == kNone) {
      holder[n] = q;
    } else if (instance_prefers(n, q, holder[n])) {
      free_rows.push_front(holder[n]);
      holder[n] = q;
    } else {
      free_rows.push_front(q);
    }
  }
  for (std::size_t n = 0; n < cols; ++n) {
    if (holder[n] != kNone) result[holder[n]] = {n, scores.at(holder[n], n)};
  }
  return result;
}

std::vector<InstanceAssignment> assign_argmax(const ScoreMatrix& scores) {
  if (scores.cols == 0) throw Error(ErrorCode::kInvalidArgument, "argmax needs N >= 1");
  std::vector<InstanceAssignment> result(scores.rows);
  for (std::size_t q = 0; q < scores.rows; ++q) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < scores.cols; ++n) {
      if (scores.at(q, n) > scores.at(q, best)) best = n;
    }
    result[q] = {best, scores.at(q, best)};
  }
  return result;
}

void validate(const LabeledProposal& proposal) {
  if (!proposal.box.valid()) throw Error(ErrorCode::kInvalidBox, "box must satisfy min < max");
  if (proposal.mask.is_raster() && !proposal.mask.within(proposal.box)) {
    throw Error(ErrorCode::kInvalidBox, "mask extends beyond its box");
  }
}

std::vector<LabeledProposal> threshold_filter(std::vector<LabeledProposal> proposals,
                                              double delta) {
  std::erase_if(proposals, [delta](const LabeledProposal& p) {
    return !p.instance_id.has_value() || !(p.score >= delta);
  });
  return proposals;
}

}  // namespace instmatch
