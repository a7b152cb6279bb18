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
#include <random>
#include <span>
#include <vector>

#include "instmatch/adapter.hpp"
#include "instmatch/embedding.hpp"

namespace instmatch {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t epochs = 40;
  double temperature = 0.07;
  /// Applied after the hidden relu of the CLIP adapter only.
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
  double beta = 10.0;
  double alpha = 0.6;

  /// Weight adapter: lr 1e-3, batch 1024. CLIP adapter: lr 1e-4, batch 512.
  static TrainConfig defaults_for(AdapterKind kind);
  void validate() const;
};

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  MlpParams m;
  MlpParams v;
  std::uint64_t t = 0;

  static AdamState for_params(const MlpParams& params);
};

/// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads, double lr);

/// One anchor of the contrastive objective. `candidates` lists pool indices
/// competing in the softmax and must contain `positive`.
struct ContrastiveTerm {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> candidates;
};

struct InfoNceResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;  // d loss / d pool[i]
};

/// Mean over terms of -log softmax(cos(anchor, c) / tau)[positive].
InfoNceResult infonce_terms(std::span<const std::vector<double>> pool,
                            std::span<const ContrastiveTerm> terms, double tau);

struct InfoNceBatchResult {
  double loss = 0.0;
  std::vector<std::vector<double>> anchor_grads;
  std::vector<std::vector<double>> candidate_grads;
};

/// Every anchor competes against the whole candidate batch; positive_index[a]
/// names its positive. Throws kDegenerateBatch with fewer than 2 candidates.
InfoNceBatchResult infonce_loss(std::span<const Embedding> anchors,
                                std::span<const Embedding> candidates,
                                std::span<const std::size_t> positive_index, double tau);

/// Each embedding with another same-label view becomes an anchor; its
/// positive is one such view drawn uniformly, its negatives every embedding
/// of another label.
std::vector<ContrastiveTerm> make_contrastive_terms(std::span<const std::int64_t> labels,
                                                    std::mt19937_64& rng);

struct BackpropResult {
  double loss = 0.0;
  MlpParams grads;
};

/// Loss and exact parameter gradients for one batch. `dropout_rng` enables
/// dropout on the CLIP adapter; pass nullptr for a deterministic pass.
BackpropResult backprop_adapter(AdapterKind kind, const MlpParams& params,
                                std::span<const Embedding> batch,
                                std::span<const ContrastiveTerm> terms, const TrainConfig& cfg,
                                std::mt19937_64* dropout_rng);

/// Samples positives from cfg.seed and runs without dropout.
BackpropResult backprop_adapter(AdapterKind kind, const MlpParams& params,
                                std::span<const Embedding> batch,
                                std::span<const std::int64_t> labels, const TrainConfig& cfg);

/// Forward-only batch loss, no dropout.
double adapter_batch_loss(AdapterKind kind, const MlpParams& params,
                          std::span<const Embedding> batch,
                          std::span<const ContrastiveTerm> terms, const TrainConfig& cfg);

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_history;  // one entry per epoch, pre-update loss
};

TrainResult train_adapter(const TemplateSet& templates, AdapterKind kind, const TrainConfig& cfg);

struct GradCheckOptions {
  AdapterKind kind = AdapterKind::kWeight;
  std::size_t dim = 8;
  std::size_t instances = 3;
  std::size_t views = 2;
  double step = 1e-5;
  std::uint64_t seed = 0;
  bool zero_params = false;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  std::size_t kink_nudges = 0;
};

/// Compares backprop_adapter against central finite differences over every
/// parameter. Parameters whose pre-activations sit near a relu kink are
/// nudged off it before differencing.
GradCheckReport grad_check(const GradCheckOptions& opts);

}  // namespace instmatch
