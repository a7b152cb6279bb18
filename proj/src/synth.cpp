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

#include "instmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "instmatch/error.hpp"

namespace instmatch {

void SynthConfig::validate() const {
  if (num_instances < 2) throw Error(ErrorCode::kConfig, "num_instances must be >= 2");
  if (templates_per_instance < 1) throw Error(ErrorCode::kConfig, "templates_per_instance must be >= 1");
  if (dim < 4 || dim % 4 != 0) throw Error(ErrorCode::kConfig, "dim must be a positive multiple of 4");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kConfig, "sigma must be >= 0");
  if (!(confusable_fraction >= 0.0 && confusable_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "confusable_fraction must lie in [0, 1]");
  }
  if (!(confusable_cosine > 0.0 && confusable_cosine < 1.0)) {
    throw Error(ErrorCode::kConfig, "confusable_cosine must lie in (0, 1)");
  }
  if (informative_channels > dim) throw Error(ErrorCode::kConfig, "informative_channels exceeds dim");
  if (confusable_channels > dim) throw Error(ErrorCode::kConfig, "confusable_channels exceeds dim");
  if (grid_size < 1) throw Error(ErrorCode::kConfig, "grid_size must be >= 1");
  if (!(patch_jitter >= 0.0)) throw Error(ErrorCode::kConfig, "patch_jitter must be >= 0");
  const std::size_t items = std::min(objects_per_image, num_instances) + distractors_per_image;
  if (items == 0) throw Error(ErrorCode::kConfig, "images need at least one proposal");
  const auto cells = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(items))));
  if (image_size / cells < 6) throw Error(ErrorCode::kConfig, "image_size too small for the layout");
}

namespace {

struct Rect {
  std::size_t r0, r1, c0, c1;  // inclusive
};

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    std::vector<std::size_t> order(cfg.dim);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t m = cfg.informative_channels == 0 ? cfg.dim : cfg.informative_channels;
    if (m < cfg.dim) std::shuffle(order.begin(), order.end(), rng_);
    informative_.assign(order.begin(), order.begin() + static_cast<long>(m));
  }

  std::vector<double> gaussian(double stddev) {
    std::vector<double> v(cfg_.dim, 0.0);
    if (stddev > 0.0) {
      std::normal_distribution<double> normal(0.0, stddev);
      for (double& x : v) x = normal(rng_);
    }
    return v;
  }

  std::vector<double> unit_vector() {
    for (;;) {
      auto v = gaussian(1.0);
      const double n = l2_norm(v);
      if (n > 1e-6) {
        for (double& x : v) x /= n;
        return v;
      }
    }
  }

  std::vector<double> noise(double stddev) { return gaussian(stddev); }

  // Unit vector supported on the informative channels.
  std::vector<double> prototype() {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      std::vector<double> v(cfg_.dim, 0.0);
      for (std::size_t c : informative_) v[c] = normal(rng_);
      const double n = l2_norm(v);
      if (n > 1e-6) {
        for (double& x : v) x /= n;
        return v;
      }
    }
  }

  std::vector<double> rotated_partner(const std::vector<double>& base) {
    const std::size_t channels =
        cfg_.confusable_channels == 0
            ? std::max<std::size_t>(1, informative_.size() / 4)
            : std::min(cfg_.confusable_channels, informative_.size());
    std::vector<std::size_t> order(informative_);
    for (;;) {
      std::shuffle(order.begin(), order.end(), rng_);
      std::vector<double> u(cfg_.dim, 0.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t i = 0; i < channels; ++i) u[order[i]] = normal(rng_);
      const double proj = dot(u, base);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * base[i];
      const double n = l2_norm(u);
      if (n < 1e-6) continue;
      const double c = cfg_.confusable_cosine;
      const double s = std::sqrt(1.0 - c * c);
      std::vector<double> out(cfg_.dim);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * base[i] + s * u[i] / n;
      return out;
    }
  }

  Rect layout() {
    const std::size_t g = cfg_.grid_size;
    const std::size_t min_side = (g + 1) / 2;
    std::uniform_int_distribution<std::size_t> side(min_side, g);
    const std::size_t h = side(rng_);
    const std::size_t w = side(rng_);
    std::uniform_int_distribution<std::size_t> r0(0, g - h);
    std::uniform_int_distribution<std::size_t> c0(0, g - w);
    const std::size_t r = r0(rng_);
    const std::size_t c = c0(rng_);
    return {r, r + h - 1, c, c + w - 1};
  }

  // Foreground patches are the view plus zero-mean jitter; background patches
  // are unrelated unit-scale noise.
  PatchGrid render(const std::vector<double>& view, const Rect& rect) {
    const std::size_t g = cfg_.grid_size;
    const std::size_t dim = cfg_.dim;
    std::vector<std::uint8_t> fg(g * g, 0);
    std::vector<std::size_t> fg_idx;
    for (std::size_t r = rect.r0; r <= rect.r1; ++r) {
      for (std::size_t c = rect.c0; c <= rect.c1; ++c) {
        fg[r * g + c] = 1;
        fg_idx.push_back(r * g + c);
      }
    }
    std::vector<std::vector<double>> jitter;
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < fg_idx.size(); ++i) {
      jitter.push_back(noise(cfg_.patch_jitter * cfg_.sigma));
      for (std::size_t d = 0; d < dim; ++d) mean[d] += jitter.back()[d];
    }
    for (double& m : mean) m /= static_cast<double>(fg_idx.size());

    std::vector<double> patches(g * g * dim);
    std::size_t next_fg = 0;
    for (std::size_t p = 0; p < g * g; ++p) {
      double* out = patches.data() + p * dim;
      if (fg[p]) {
        const auto& j = jitter[next_fg++];
        for (std::size_t d = 0; d < dim; ++d) out[d] = view[d] + (j[d] - mean[d]);
      } else {
        const auto bg = gaussian(1.0 / std::sqrt(static_cast<double>(dim)));
        std::copy(bg.begin(), bg.end(), out);
      }
    }
    return PatchGrid(g, g, dim, std::move(patches), std::move(fg));
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> informative_;
};

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace

SynthDataset gen_synth(const SynthConfig& cfg) {
  cfg.validate();
  Generator gen(cfg);
  const std::size_t n_inst = cfg.num_instances;
  const std::size_t views = cfg.templates_per_instance;
  SynthDataset ds;

  const auto pairs = static_cast<std::size_t>(
      std::floor(cfg.confusable_fraction * static_cast<double>(n_inst) / 2.0 + 1e-9));
  std::vector<std::vector<double>> protos(n_inst);
  for (std::size_t n = 0; n < n_inst; ++n) {
    if (n < 2 * pairs && n % 2 == 1) {
      protos[n] = gen.rotated_partner(protos[n - 1]);
      ds.confusable_pairs.emplace_back(n - 1, n);
    } else {
      protos[n] = gen.prototype();
    }
  }
  for (std::size_t n = 0; n < n_inst; ++n) {
    ds.prototypes.emplace_back(protos[n]);
    ds.instance_ids.push_back(static_cast<std::int64_t>(n));
  }

  std::vector<Rect> template_layouts;
  for (std::size_t n = 0; n < n_inst; ++n) {
    for (std::size_t k = 0; k < views; ++k) {
      template_layouts.push_back(gen.layout());
      ds.template_grids.push_back(gen.render(add(protos[n], gen.noise(cfg.sigma)),
                                             template_layouts.back()));
    }
  }
  std::vector<Embedding> pooled;
  pooled.reserve(ds.template_grids.size());
  for (const auto& g : ds.template_grids) pooled.push_back(ffa_pool(g));
  ds.templates = TemplateSet(ds.instance_ids, views, std::move(pooled));

  // Orthonormal basis of the prototype span for distractor sampling.
  std::vector<std::vector<double>> basis;
  for (const auto& p : protos) {
    auto v = p;
    for (const auto& b : basis) {
      const double c = dot(v, b);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
    }
    const double n = l2_norm(v);
    if (n > 1e-8) {
      for (double& x : v) x /= n;
      basis.push_back(std::move(v));
    }
  }
  const bool can_orthogonalize = basis.size() < cfg.dim;

  const std::size_t objects = std::min(cfg.objects_per_image, n_inst);
  const std::size_t items = objects + cfg.distractors_per_image;
  const auto cells = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(items))));
  const std::size_t cell = cfg.image_size / cells;
  std::vector<std::size_t> instance_order(n_inst);
  std::iota(instance_order.begin(), instance_order.end(), 0);
  std::vector<std::size_t> cell_order(cells * cells);
  std::iota(cell_order.begin(), cell_order.end(), 0);
  std::uniform_int_distribution<std::size_t> pick_view(0, views - 1);

  for (std::size_t img = 0; img < cfg.num_images; ++img) {
    const auto image_id = static_cast<std::int64_t>(img);
    std::shuffle(instance_order.begin(), instance_order.end(), gen.rng());
    std::shuffle(cell_order.begin(), cell_order.end(), gen.rng());
    for (std::size_t item = 0; item < items; ++item) {
      const std::size_t c = cell_order[item];
      const double x0 = static_cast<double>((c % cells) * cell + 2);
      const double y0 = static_cast<double>((c / cells) * cell + 2);
      const Box box{x0, y0, x0 + static_cast<double>(cell - 4), y0 + static_cast<double>(cell - 4)};

      SynthQuery q;
      q.image_id = image_id;
      q.box = box;
      q.mask = Mask::filled_box(cfg.image_size, cfg.image_size, box);
      if (item < objects) {
        const std::size_t n = instance_order[item];
        const std::size_t k = pick_view(gen.rng());
        q.grid = gen.render(add(protos[n], gen.noise(cfg.sigma)), template_layouts[n * views + k]);
        q.instance_id = static_cast<std::int64_t>(n);
        ds.ground_truth.objects.push_back({image_id, q.instance_id.value(), box,
                                           "gt/" + std::to_string(ds.ground_truth.objects.size()),
                                           q.mask});
      } else {
        auto v = gen.unit_vector();
        while (can_orthogonalize) {
          for (const auto& b : basis) {
            const double proj = dot(v, b);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * b[i];
          }
          const double n = l2_norm(v);
          if (n > 1e-6) {
            for (double& x : v) x /= n;
            break;
          }
          v = gen.unit_vector();
        }
        q.grid = gen.render(add(v, gen.noise(cfg.sigma)), gen.layout());
      }
      ds.queries.push_back(std::move(q));
    }
    ds.ground_truth.image_ids.push_back(image_id);
  }
  return ds;
}

}  // namespace instmatch
