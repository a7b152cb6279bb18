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

#include "instmatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "instmatch/error.hpp"

namespace instmatch {

TrainConfig TrainConfig::defaults_for(AdapterKind kind) {
  TrainConfig cfg;
  if (kind == AdapterKind::kClip) {
    cfg.learning_rate = 1e-4;
    cfg.batch_size = 512;
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfig, "learning_rate must be > 0");
  if (!(temperature > 0.0)) throw Error(ErrorCode::kConfig, "temperature must be > 0");
  if (batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::kConfig, "dropout_rate must lie in [0, 1)");
  }
  if (!(beta > 0.0)) throw Error(ErrorCode::kConfig, "beta must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kConfig, "alpha must lie in [0, 1]");
}

AdamState AdamState::for_params(const MlpParams& params) {
  AdamState s;
  s.m = MlpParams::zeros(params.dim);
  s.v = MlpParams::zeros(params.dim);
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads, double lr) {
  if (state.m.dim != params.dim || grads.dim != params.dim) {
    throw Error(ErrorCode::kDimMismatch, "Adam state, params and grads must share a shape");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  auto p = params.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  auto g = grads.tensors();
  for (std::size_t ti = 0; ti < p.size(); ++ti) {
    for (std::size_t i = 0; i < p[ti].size(); ++i) {
      const double gi = g[ti][i];
      m[ti][i] = AdamState::kBeta1 * m[ti][i] + (1.0 - AdamState::kBeta1) * gi;
      v[ti][i] = AdamState::kBeta2 * v[ti][i] + (1.0 - AdamState::kBeta2) * gi * gi;
      const double m_hat = m[ti][i] / c1;
      const double v_hat = v[ti][i] / c2;
      p[ti][i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEps);
    }
  }
}

InfoNceResult infonce_terms(std::span<const std::vector<double>> pool,
                            std::span<const ContrastiveTerm> terms, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  if (terms.empty()) throw Error(ErrorCode::kDegenerateBatch, "no anchors in batch");
  std::vector<double> norms(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) norms[i] = l2_norm(pool[i]);

  InfoNceResult r;
  r.grads.assign(pool.size(), std::vector<double>{});
  const double scale = 1.0 / static_cast<double>(terms.size());
  std::vector<double> sims;
  std::vector<double> probs;
  for (const auto& term : terms) {
    if (term.candidates.size() < 2) {
      throw Error(ErrorCode::kDegenerateBatch, "anchor has fewer than 2 candidates");
    }
    const auto& a = pool[term.anchor];
    const double na = norms[term.anchor];
    if (na < kZeroNormTolerance) throw Error(ErrorCode::kZeroVector, "zero-norm anchor");
    sims.resize(term.candidates.size());
    std::size_t pos_slot = term.candidates.size();
    for (std::size_t j = 0; j < term.candidates.size(); ++j) {
      const std::size_t c = term.candidates[j];
      if (c == term.positive) pos_slot = j;
      if (pool[c].size() != a.size()) {
        throw Error(ErrorCode::kDimMismatch, "candidate dim differs from anchor");
      }
      if (norms[c] < kZeroNormTolerance) throw Error(ErrorCode::kZeroVector, "zero-norm candidate");
      sims[j] = dot(a, pool[c]) / (na * norms[c]);
    }
    if (pos_slot == term.candidates.size()) {
      throw Error(ErrorCode::kInvalidArgument, "positive is not among the candidates");
    }
    const double max_logit = *std::max_element(sims.begin(), sims.end()) / tau;
    double denom = 0.0;
    probs.resize(sims.size());
    for (std::size_t j = 0; j < sims.size(); ++j) {
      probs[j] = std::exp(sims[j] / tau - max_logit);
      denom += probs[j];
    }
    r.loss += scale * (max_logit + std::log(denom) - sims[pos_slot] / tau);

    auto grad_of = [&](std::size_t idx) -> std::vector<double>& {
      if (r.grads[idx].empty()) r.grads[idx].assign(pool[idx].size(), 0.0);
      return r.grads[idx];
    };
    for (std::size_t j = 0; j < sims.size(); ++j) {
      const double dl_ds = scale * (probs[j] / denom - (j == pos_slot ? 1.0 : 0.0)) / tau;
      if (dl_ds == 0.0) continue;
      const std::size_t c = term.candidates[j];
      const auto& cv = pool[c];
      const double nc = norms[c];
      const double s = sims[j];
      auto& ga = grad_of(term.anchor);
      for (std::size_t i = 0; i < a.size(); ++i) {
        ga[i] += dl_ds * (cv[i] / (na * nc) - s * a[i] / (na * na));
      }
      auto& gc = grad_of(c);
      for (std::size_t i = 0; i < a.size(); ++i) {
        gc[i] += dl_ds * (a[i] / (na * nc) - s * cv[i] / (nc * nc));
      }
    }
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (r.grads[i].empty()) r.grads[i].assign(pool[i].size(), 0.0);
  }
  return r;
}

InfoNceBatchResult infonce_loss(std::span<const Embedding> anchors,
                                std::span<const Embedding> candidates,
                                std::span<const std::size_t> positive_index, double tau) {
  if (candidates.size() < 2) {
    throw Error(ErrorCode::kDegenerateBatch, "need at least 2 candidates per anchor");
  }
  if (positive_index.size() != anchors.size()) {
    throw Error(ErrorCode::kDimMismatch, "one positive index per anchor required");
  }
  std::vector<std::vector<double>> pool;
  pool.reserve(anchors.size() + candidates.size());
  for (const auto& a : anchors) pool.emplace_back(a.values().begin(), a.values().end());
  for (const auto& c : candidates) pool.emplace_back(c.values().begin(), c.values().end());

  std::vector<std::size_t> all(candidates.size());
  std::iota(all.begin(), all.end(), anchors.size());
  std::vector<ContrastiveTerm> terms;
  terms.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (positive_index[a] >= candidates.size()) {
      throw Error(ErrorCode::kInvalidArgument, "positive index out of range");
    }
    terms.push_back({a, anchors.size() + positive_index[a], all});
  }
  InfoNceResult r = infonce_terms(pool, terms, tau);
  InfoNceBatchResult out;
  out.loss = r.loss;
  out.anchor_grads.assign(r.grads.begin(), r.grads.begin() + static_cast<long>(anchors.size()));
  out.candidate_grads.assign(r.grads.begin() + static_cast<long>(anchors.size()), r.grads.end());
  return out;
}

std::vector<ContrastiveTerm> make_contrastive_terms(std::span<const std::int64_t> labels,
                                                    std::mt19937_64& rng) {
  const std::set<std::int64_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw Error(ErrorCode::kDegenerateBatch, "batch needs at least 2 distinct instances");
  }
  std::vector<ContrastiveTerm> terms;
  std::vector<std::size_t> same;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    same.clear();
    ContrastiveTerm term;
    term.anchor = i;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        same.push_back(j);
      } else {
        term.candidates.push_back(j);
      }
    }
    if (same.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, same.size() - 1);
    term.positive = same[pick(rng)];
    term.candidates.insert(term.candidates.begin(), term.positive);
    terms.push_back(std::move(term));
  }
  if (terms.empty()) {
    throw Error(ErrorCode::kDegenerateBatch, "no instance has two views in the batch");
  }
  return terms;
}

namespace {

// Activations of one adapter forward pass kept for the backward pass.
struct ForwardCache {
  std::vector<double> input;       // beta*f (weight) or f (clip)
  std::vector<double> pre_hidden;  // w1 x + b1
  std::vector<double> hidden;      // relu, after dropout when active
  std::vector<double> drop_scale;  // empty when dropout is off
  std::vector<double> pre_out;     // w2 hidden + b2
  std::vector<double> gates;       // weight adapter only
  std::vector<double> y;
};

ForwardCache forward(AdapterKind kind, const MlpParams& p, const TrainConfig& cfg,
                     std::span<const double> f, std::mt19937_64* dropout_rng) {
  if (f.size() != p.dim) throw Error(ErrorCode::kDimMismatch, "embedding dim differs from adapter");
  ForwardCache fc;
  fc.input.assign(f.begin(), f.end());
  if (kind == AdapterKind::kWeight) {
    for (double& v : fc.input) v *= cfg.beta;
  }
  fc.pre_hidden.resize(p.hidden);
  fc.hidden.resize(p.hidden);
  for (std::size_t h = 0; h < p.hidden; ++h) {
    const double* row = p.w1.data() + h * p.dim;
    double s = p.b1[h];
    for (std::size_t c = 0; c < p.dim; ++c) s += row[c] * fc.input[c];
    fc.pre_hidden[h] = s;
    fc.hidden[h] = s > 0.0 ? s : 0.0;
  }
  if (kind == AdapterKind::kClip && dropout_rng != nullptr && cfg.dropout_rate > 0.0) {
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    const double inv = 1.0 / (1.0 - cfg.dropout_rate);
    fc.drop_scale.resize(p.hidden);
    for (std::size_t h = 0; h < p.hidden; ++h) {
      fc.drop_scale[h] = keep(*dropout_rng) ? inv : 0.0;
      fc.hidden[h] *= fc.drop_scale[h];
    }
  }
  fc.pre_out.resize(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) {
    const double* row = p.w2.data() + c * p.hidden;
    double s = p.b2[c];
    for (std::size_t h = 0; h < p.hidden; ++h) s += row[h] * fc.hidden[h];
    fc.pre_out[c] = s;
  }
  fc.y.resize(p.dim);
  if (kind == AdapterKind::kWeight) {
    fc.gates.resize(p.dim);
    for (std::size_t c = 0; c < p.dim; ++c) {
      fc.gates[c] = gate_from_logit(fc.pre_out[c]);
      fc.y[c] = fc.gates[c] * fc.input[c];
    }
  } else {
    for (std::size_t c = 0; c < p.dim; ++c) {
      fc.y[c] = cfg.alpha * fc.pre_out[c] + (1.0 - cfg.alpha) * fc.input[c];
    }
  }
  return fc;
}

void backward(AdapterKind kind, const MlpParams& p, const TrainConfig& cfg,
              const ForwardCache& fc, std::span<const double> dy, MlpParams& g) {
  std::vector<double> d_out(p.dim);
  if (kind == AdapterKind::kWeight) {
    for (std::size_t c = 0; c < p.dim; ++c) {
      const double d_gate = dy[c] * fc.input[c];
      const double w = fc.gates[c];
      // relu'(0) = 0
      d_out[c] = fc.pre_out[c] > 0.0 ? d_gate * w * (1.0 - w) : 0.0;
    }
  } else {
    for (std::size_t c = 0; c < p.dim; ++c) d_out[c] = cfg.alpha * dy[c];
  }
  std::vector<double> d_hidden(p.hidden, 0.0);
  for (std::size_t c = 0; c < p.dim; ++c) {
    const double d = d_out[c];
    if (d == 0.0) continue;
    g.b2[c] += d;
    const double* w_row = p.w2.data() + c * p.hidden;
    double* g_row = g.w2.data() + c * p.hidden;
    for (std::size_t h = 0; h < p.hidden; ++h) {
      g_row[h] += d * fc.hidden[h];
      d_hidden[h] += d * w_row[h];
    }
  }
  for (std::size_t h = 0; h < p.hidden; ++h) {
    double d = d_hidden[h];
    if (!fc.drop_scale.empty()) d *= fc.drop_scale[h];
    if (!(fc.pre_hidden[h] > 0.0) || d == 0.0) continue;
    g.b1[h] += d;
    double* g_row = g.w1.data() + h * p.dim;
    for (std::size_t c = 0; c < p.dim; ++c) g_row[c] += d * fc.input[c];
  }
}

}  // namespace

BackpropResult backprop_adapter(AdapterKind kind, const MlpParams& params,
                                std::span<const Embedding> batch,
                                std::span<const ContrastiveTerm> terms, const TrainConfig& cfg,
                                std::mt19937_64* dropout_rng) {
  std::vector<ForwardCache> caches;
  caches.reserve(batch.size());
  std::vector<std::vector<double>> outputs;
  outputs.reserve(batch.size());
  for (const auto& e : batch) {
    caches.push_back(forward(kind, params, cfg, e.values(), dropout_rng));
    outputs.push_back(caches.back().y);
  }
  const InfoNceResult nce = infonce_terms(outputs, terms, cfg.temperature);
  BackpropResult r;
  r.loss = nce.loss;
  r.grads = MlpParams::zeros(params.dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward(kind, params, cfg, caches[i], nce.grads[i], r.grads);
  }
  return r;
}

BackpropResult backprop_adapter(AdapterKind kind, const MlpParams& params,
                                std::span<const Embedding> batch,
                                std::span<const std::int64_t> labels, const TrainConfig& cfg) {
  if (labels.size() != batch.size()) {
    throw Error(ErrorCode::kDimMismatch, "one label per batch embedding required");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto terms = make_contrastive_terms(labels, rng);
  return backprop_adapter(kind, params, batch, terms, cfg, nullptr);
}

double adapter_batch_loss(AdapterKind kind, const MlpParams& params,
                          std::span<const Embedding> batch,
                          std::span<const ContrastiveTerm> terms, const TrainConfig& cfg) {
  std::vector<std::vector<double>> outputs;
  outputs.reserve(batch.size());
  for (const auto& e : batch) outputs.push_back(forward(kind, params, cfg, e.values(), nullptr).y);
  return infonce_terms(outputs, terms, cfg.temperature).loss;
}

namespace {

// Whole instances per batch so every anchor keeps its other views; a single
// batch when the template set fits.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t instances, std::size_t views,
                                                   std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(instances);
  std::iota(order.begin(), order.end(), 0);
  if (instances * views <= batch_size) return {order};
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t per_batch = std::max<std::size_t>(2, batch_size / views);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < instances; i += per_batch) {
    batches.emplace_back(order.begin() + static_cast<long>(i),
                         order.begin() + static_cast<long>(std::min(instances, i + per_batch)));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

}  // namespace

TrainResult train_adapter(const TemplateSet& templates, AdapterKind kind, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n_inst = templates.num_instances();
  const std::size_t views = templates.templates_per_instance();
  if (n_inst < 2 || views < 2) {
    throw Error(ErrorCode::kDegenerateBatch, "training needs N >= 2 instances and K >= 2 views");
  }
  TrainResult result;
  result.params = MlpParams::uniform_init(templates.dim(), cfg.seed);
  if (cfg.epochs == 0) return result;

  std::seed_seq seq{cfg.seed, std::uint64_t{0x7261696eu}};
  std::mt19937_64 rng(seq);
  AdamState adam = AdamState::for_params(result.params);
  const bool dropout = kind == AdapterKind::kClip && cfg.dropout_rate > 0.0;

  std::vector<Embedding> batch;
  std::vector<std::int64_t> labels;
  result.loss_history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t anchor_sum = 0;
    for (const auto& group : plan_batches(n_inst, views, cfg.batch_size, rng)) {
      batch.clear();
      labels.clear();
      for (std::size_t n : group) {
        for (std::size_t k = 0; k < views; ++k) {
          batch.push_back(templates.at(n, k));
          labels.push_back(static_cast<std::int64_t>(n));
        }
      }
      const auto terms = make_contrastive_terms(labels, rng);
      const BackpropResult step =
          backprop_adapter(kind, result.params, batch, terms, cfg, dropout ? &rng : nullptr);
      adam_step(adam, result.params, step.grads, cfg.learning_rate);
      loss_sum += step.loss * static_cast<double>(terms.size());
      anchor_sum += terms.size();
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(anchor_sum));
  }
  return result;
}

namespace {

double min_abs_preactivation(AdapterKind kind, const MlpParams& p, const TrainConfig& cfg,
                             std::span<const Embedding> batch) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : batch) {
    const ForwardCache fc = forward(kind, p, cfg, e.values(), nullptr);
    for (double v : fc.pre_hidden) m = std::min(m, std::abs(v));
    if (kind == AdapterKind::kWeight) {
      for (double v : fc.pre_out) m = std::min(m, std::abs(v));
    }
  }
  return m;
}

}  // namespace

GradCheckReport grad_check(const GradCheckOptions& opts) {
  if (opts.dim > 32) throw Error(ErrorCode::kInvalidArgument, "grad_check supports dim <= 32");
  if (!(opts.step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step must be > 0");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(opts.dim));

  // Heavy view noise keeps the softmax away from saturation; a saturated loss
  // has gradients below finite-difference round-off.
  std::vector<Embedding> batch;
  std::vector<std::int64_t> labels;
  for (std::size_t n = 0; n < opts.instances; ++n) {
    std::vector<double> proto(opts.dim);
    for (double& v : proto) v = normal(rng) * scale;
    for (std::size_t k = 0; k < opts.views; ++k) {
      std::vector<double> view(proto);
      for (double& v : view) v += 2.0 * normal(rng) * scale;
      batch.emplace_back(std::move(view));
      labels.push_back(static_cast<std::int64_t>(n));
    }
  }
  const auto terms = make_contrastive_terms(labels, rng);
  TrainConfig cfg = TrainConfig::defaults_for(opts.kind);
  cfg.seed = opts.seed;

  MlpParams params = opts.zero_params ? MlpParams::zeros(opts.dim)
                                      : MlpParams::uniform_init(opts.dim, opts.seed + 1);
  GradCheckReport report;
  constexpr double kKinkMargin = 1e-3;
  std::uniform_real_distribution<double> nudge(0.01, 0.02);
  std::bernoulli_distribution sign(0.5);
  while (min_abs_preactivation(opts.kind, params, cfg, batch) < kKinkMargin) {
    if (++report.kink_nudges > 100) {
      throw Error(ErrorCode::kInvalidArgument, "could not move pre-activations off the relu kink");
    }
    for (double& b : params.b1) b += sign(rng) ? nudge(rng) : -nudge(rng);
    if (opts.kind == AdapterKind::kWeight) {
      for (double& b : params.b2) b += sign(rng) ? nudge(rng) : -nudge(rng);
    }
  }

  const BackpropResult analytic = backprop_adapter(opts.kind, params, batch, terms, cfg, nullptr);
  MlpParams probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.grads.tensors();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    for (std::size_t i = 0; i < probe_tensors[t].size(); ++i) {
      const double saved = probe_tensors[t][i];
      probe_tensors[t][i] = saved + opts.step;
      const double up = adapter_batch_loss(opts.kind, probe, batch, terms, cfg);
      probe_tensors[t][i] = saved - opts.step;
      const double down = adapter_batch_loss(opts.kind, probe, batch, terms, cfg);
      probe_tensors[t][i] = saved;
      const double fd = (up - down) / (2.0 * opts.step);
      const double rel = std::abs(grad_tensors[t][i] - fd) / std::max(std::abs(fd), 1e-8);
      report.max_relative_error = std::max(report.max_relative_error, rel);
      ++report.parameters_checked;
    }
  }
  return report;
}

}  // namespace instmatch
