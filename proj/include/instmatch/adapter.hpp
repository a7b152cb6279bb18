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
#include <vector>

#include "instmatch/embedding.hpp"

namespace instmatch {

enum class AdapterKind { kWeight, kClip };

/// Two-layer bottleneck MLP: C -> C/4 -> C. Matrices are row-major.
struct MlpParams {
  std::size_t dim = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x dim
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // dim x hidden
  std::vector<double> b2;  // dim

  /// All-zero parameters. Requires dim divisible by 4.
  static MlpParams zeros(std::size_t dim);
  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static MlpParams uniform_init(std::size_t dim, std::uint64_t seed);

  std::array<std::span<double>, 4> tensors() { return {w1, b1, w2, b2}; }
  std::array<std::span<const double>, 4> tensors() const { return {w1, b1, w2, b2}; }
  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// Checks shapes and finiteness.
  void validate() const;

  bool operator==(const MlpParams&) const = default;
};

inline constexpr std::array<const char*, 4> kMlpTensorNames = {"w1", "b1", "w2", "b2"};

struct MlpOutput {
  std::vector<double> hidden;  // relu(w1 x + b1)
  std::vector<double> out;     // w2 hidden + b2
};

MlpOutput mlp_forward(const MlpParams& params, std::span<const double> x);

struct WeightAdapterConfig {
  double beta = 10.0;
  std::size_t dim = 0;
  void validate() const;
};

struct ClipAdapterConfig {
  double alpha = 0.6;
  std::size_t dim = 0;
  void validate() const;
};

struct WeightAdapterOutput {
  Embedding gates;     // w, element-wise in [0.5, 1)
  Embedding weighted;  // w * (beta f)
};

/// sigmoid(relu(logit)), capped at the largest double below one so gates
/// stay in [0.5, 1) even when the sigmoid saturates.
double gate_from_logit(double logit);

WeightAdapterOutput weight_adapter_forward(const WeightAdapterConfig& cfg,
                                           const MlpParams& params, const Embedding& f);

/// alpha * MLP(f) + (1 - alpha) * f
Embedding clip_adapter_forward(const ClipAdapterConfig& cfg, const MlpParams& params,
                               const Embedding& f);

/// Cosine between w1*(beta q) and w2*(beta k). beta cancels and only has to
/// be positive.
double weighted_cosine(const Embedding& q, const Embedding& k, const Embedding& w1,
                       const Embedding& w2, double beta);

/// A trained adapter of either kind, ready to refine embeddings.
struct Adapter {
  AdapterKind kind = AdapterKind::kWeight;
  MlpParams params;
  double beta = 10.0;
  double alpha = 0.6;

  std::size_t dim() const { return params.dim; }
  Embedding apply(const Embedding& f) const;
};

}  // namespace instmatch
