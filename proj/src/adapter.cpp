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

#include "instmatch/adapter.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "instmatch/error.hpp"

namespace instmatch {
namespace {

void check_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw Error(ErrorCode::kDimMismatch,
                "expected dim " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t dim) {
  if (dim < 4 || dim % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "adapter dim must be a positive multiple of 4");
  }
  MlpParams p;
  p.dim = dim;
  p.hidden = dim / 4;
  p.w1.assign(p.hidden * dim, 0.0);
  p.b1.assign(p.hidden, 0.0);
  p.w2.assign(dim * p.hidden, 0.0);
  p.b2.assign(dim, 0.0);
  return p;
}

MlpParams MlpParams::uniform_init(std::size_t dim, std::uint64_t seed) {
  MlpParams p = zeros(dim);
  std::mt19937_64 rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(p.dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(p.hidden));
  std::uniform_real_distribution<double> u1(-bound1, bound1);
  std::uniform_real_distribution<double> u2(-bound2, bound2);
  for (double& v : p.w1) v = u1(rng);
  for (double& v : p.w2) v = u2(rng);
  return p;
}

void MlpParams::validate() const {
  if (dim < 4 || dim % 4 != 0 || hidden != dim / 4) {
    throw Error(ErrorCode::kInvalidArgument, "adapter dim must be a positive multiple of 4");
  }
  if (w1.size() != hidden * dim || b1.size() != hidden || w2.size() != dim * hidden ||
      b2.size() != dim) {
    throw Error(ErrorCode::kDimMismatch, "MLP tensor shapes do not match dim");
  }
  for (auto t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "MLP parameter is not finite");
    }
  }
}

MlpOutput mlp_forward(const MlpParams& params, std::span<const double> x) {
  check_dim(x.size(), params.dim);
  MlpOutput r;
  r.hidden.resize(params.hidden);
  for (std::size_t h = 0; h < params.hidden; ++h) {
    const double* row = params.w1.data() + h * params.dim;
    double s = params.b1[h];
    for (std::size_t c = 0; c < params.dim; ++c) s += row[c] * x[c];
    r.hidden[h] = s > 0.0 ? s : 0.0;
  }
  r.out.resize(params.dim);
  for (std::size_t c = 0; c < params.dim; ++c) {
    const double* row = params.w2.data() + c * params.hidden;
    double s = params.b2[c];
    for (std::size_t h = 0; h < params.hidden; ++h) s += row[h] * r.hidden[h];
    r.out[c] = s;
  }
  return r;
}

void WeightAdapterConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be a positive finite scalar");
  }
}

void ClipAdapterConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  }
}

double gate_from_logit(double logit) {
  static const double kMaxGate = std::nextafter(1.0, 0.0);
  const double r = logit > 0.0 ? logit : 0.0;
  const double s = 1.0 / (1.0 + std::exp(-r));
  return s < kMaxGate ? s : kMaxGate;
}

WeightAdapterOutput weight_adapter_forward(const WeightAdapterConfig& cfg,
                                           const MlpParams& params, const Embedding& f) {
  cfg.validate();
  check_dim(f.dim(), cfg.dim);
  check_dim(f.dim(), params.dim);
  std::vector<double> scaled(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) scaled[i] = cfg.beta * f[i];
  const MlpOutput mlp = mlp_forward(params, scaled);
  std::vector<double> gates(f.dim());
  std::vector<double> weighted(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) {
    gates[i] = gate_from_logit(mlp.out[i]);
    weighted[i] = gates[i] * scaled[i];
  }
  return {Embedding(std::move(gates)), Embedding(std::move(weighted))};
}

Embedding clip_adapter_forward(const ClipAdapterConfig& cfg, const MlpParams& params,
                               const Embedding& f) {
  cfg.validate();
  check_dim(f.dim(), cfg.dim);
  check_dim(f.dim(), params.dim);
  const MlpOutput mlp = mlp_forward(params, f.values());
  std::vector<double> out(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) {
    out[i] = cfg.alpha * mlp.out[i] + (1.0 - cfg.alpha) * f[i];
  }
  return Embedding(std::move(out));
}

double weighted_cosine(const Embedding& q, const Embedding& k, const Embedding& w1,
                       const Embedding& w2, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  const std::size_t d = q.dim();
  if (k.dim() != d || w1.dim() != d || w2.dim() != d) {
    throw Error(ErrorCode::kDimMismatch, "weighted cosine operands have different dims");
  }
  double num = 0.0, qq = 0.0, kk = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double a = w1[i] * q[i];
    const double b = w2[i] * k[i];
    num += a * b;
    qq += a * a;
    kk += b * b;
  }
  const double nq = std::sqrt(qq);
  const double nk = std::sqrt(kk);
  if (nq < kZeroNormTolerance || nk < kZeroNormTolerance) {
    throw Error(ErrorCode::kZeroVector, "weighted vector has zero norm");
  }
  const double c = num / (nq * nk);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

Embedding Adapter::apply(const Embedding& f) const {
  if (kind == AdapterKind::kWeight) {
    return weight_adapter_forward({beta, params.dim}, params, f).weighted;
  }
  return clip_adapter_forward({alpha, params.dim}, params, f);
}

}  // namespace instmatch
