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

#include <doctest.h>

#include <cmath>
#include <random>

#include "instmatch/adapter.hpp"
#include "instmatch/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace instmatch;
using testutil::random_embedding;
using testutil::random_vector;
using testutil::to_vec;

namespace {

MlpParams random_params(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
  MlpParams p = MlpParams::zeros(dim);
  for (auto t : p.tensors()) {
    for (double& v : t) v = std::uniform_real_distribution<double>(-scale, scale)(rng);
  }
  return p;
}

}  // namespace

TEST_CASE("MLP parameter shapes and initialisation") {
  const auto z = MlpParams::zeros(16);
  CHECK(z.hidden == 4);
  CHECK(z.w1.size() == 64);
  CHECK(z.w2.size() == 64);
  CHECK(z.parameter_count() == 64 + 4 + 64 + 16);
  CHECK_THROWS_AS(MlpParams::zeros(6), Error);
  CHECK_THROWS_AS(MlpParams::zeros(0), Error);

  const auto a = MlpParams::uniform_init(16, 7);
  const auto b = MlpParams::uniform_init(16, 7);
  CHECK(a == b);
  CHECK_FALSE(a == MlpParams::uniform_init(16, 8));
  for (double v : a.w1) CHECK(std::fabs(v) <= 1.0 / std::sqrt(16.0));
  for (double v : a.w2) CHECK(std::fabs(v) <= 1.0 / std::sqrt(4.0));
  for (double v : a.b1) CHECK(v == 0.0);
  for (double v : a.b2) CHECK(v == 0.0);

  auto bad = a;
  bad.w2[3] = NAN;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = a;
  bad.b1.pop_back();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("mlp_forward") {
  SUBCASE("zero params give zero outputs") {
    std::mt19937_64 rng(1);
    const auto out = mlp_forward(MlpParams::zeros(8), random_vector(rng, 8));
    for (double v : out.hidden) CHECK(v == 0.0);
    for (double v : out.out) CHECK(v == 0.0);
  }
  SUBCASE("hand-set passthrough of x[0]") {
    auto p = MlpParams::zeros(4);
    p.w1[0] = 1.0;  // hidden[0] = relu(x[0])
    p.w2[0] = 1.0;  // out[0] = hidden[0]
    const auto out = mlp_forward(p, std::vector<double>{0.75, -3.0, 2.0, 9.0});
    CHECK(out.out[0] == 0.75);
    CHECK(out.out[1] == 0.0);
  }
  SUBCASE("random params match the matvec oracle") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_params(rng, 8);
      const auto x = random_vector(rng, 8);
      const auto got = mlp_forward(p, x);
      const auto [hid, out] = oracle::mlp(p.w1, p.b1, p.w2, p.b2, x);
      for (std::size_t i = 0; i < hid.size(); ++i) CHECK(std::fabs(got.hidden[i] - hid[i]) <= 1e-10);
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::fabs(got.out[i] - out[i]) <= 1e-10);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(mlp_forward(MlpParams::zeros(8), std::vector<double>(4, 1.0)), Error);
  }
}

TEST_CASE("weight adapter forward") {
  SUBCASE("zero params give half gates") {
    const WeightAdapterConfig cfg{10.0, 8};
    const Embedding f({1, 0, 0, 0, 0, 0, 0, 0});
    const auto out = weight_adapter_forward(cfg, MlpParams::zeros(8), f);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(out.gates[i] == 0.5);
      CHECK(out.weighted[i] == 0.5 * 10.0 * f[i]);
    }
  }
  SUBCASE("gates stay in [0.5, 1) for large random params") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto p = random_params(rng, 8, 50.0);
      const auto out = weight_adapter_forward({10.0, 8}, p, random_embedding(rng, 8));
      for (std::size_t i = 0; i < 8; ++i) {
        CHECK(out.gates[i] >= 0.5);
        CHECK(out.gates[i] < 1.0);
      }
    }
  }
  SUBCASE("matches sigmoid(relu(mlp(beta f))) composed by hand") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_params(rng, 8, 0.3);
      const auto f = random_vector(rng, 8);
      std::vector<double> scaled = f;
      for (auto& v : scaled) v *= 10.0;
      const auto [hid, logits] = oracle::mlp(p.w1, p.b1, p.w2, p.b2, scaled);
      const auto out = weight_adapter_forward({10.0, 8}, p, Embedding(f));
      for (std::size_t i = 0; i < 8; ++i) {
        const double w = oracle::sigmoid(std::max(0.0, logits[i]));
        CHECK(std::fabs(out.gates[i] - w) <= 1e-12);
        CHECK(std::fabs(out.weighted[i] - w * scaled[i]) <= 1e-10);
      }
    }
  }
  SUBCASE("saturated logits are capped below one") {
    CHECK(gate_from_logit(1e3) < 1.0);
    CHECK(gate_from_logit(-1e3) == 0.5);
    CHECK(gate_from_logit(0.0) == 0.5);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(weight_adapter_forward({0.0, 8}, MlpParams::zeros(8), Embedding(std::vector<double>(8, 1.0))), Error);
    CHECK_THROWS_AS(weight_adapter_forward({10.0, 8}, MlpParams::zeros(8), Embedding(std::vector<double>(4, 1.0))), Error);
  }
}

TEST_CASE("clip adapter forward") {
  std::mt19937_64 rng(5);
  const auto p = random_params(rng, 8);
  const auto f = random_embedding(rng, 8);
  SUBCASE("alpha = 0 leaves f unchanged") {
    CHECK(clip_adapter_forward({0.0, 8}, p, f) == f);
  }
  SUBCASE("alpha = 1 with zero params gives zero") {
    const auto out = clip_adapter_forward({1.0, 8}, MlpParams::zeros(8), f);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == 0.0);
  }
  SUBCASE("alpha = 0.6 matches the linear combination oracle") {
    const auto [hid, mlp] = oracle::mlp(p.w1, p.b1, p.w2, p.b2, to_vec(f));
    const auto out = clip_adapter_forward({0.6, 8}, p, f);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(std::fabs(out[i] - (0.6 * mlp[i] + 0.4 * f[i])) <= 1e-10);
    }
  }
  SUBCASE("output is linear in alpha") {
    const auto a0 = clip_adapter_forward({0.0, 8}, p, f);
    const auto a1 = clip_adapter_forward({1.0, 8}, p, f);
    for (double alpha : {0.25, 0.6, 0.9}) {
      const auto mid = clip_adapter_forward({alpha, 8}, p, f);
      for (std::size_t i = 0; i < 8; ++i) {
        CHECK(std::fabs(mid[i] - ((1 - alpha) * a0[i] + alpha * a1[i])) <= 1e-12);
      }
    }
  }
  SUBCASE("alpha outside [0, 1] is rejected") {
    CHECK_THROWS_AS(clip_adapter_forward({1.5, 8}, p, f), Error);
    CHECK_THROWS_AS(clip_adapter_forward({-0.1, 8}, p, f), Error);
  }
}

TEST_CASE("weighted cosine") {
  std::mt19937_64 rng(6);
  SUBCASE("uniform half gates reduce to plain cosine") {
    const Embedding half(std::vector<double>(16, 0.5));
    for (int trial = 0; trial < 100; ++trial) {
      const auto q = random_embedding(rng, 16);
      const auto k = random_embedding(rng, 16);
      CHECK(std::fabs(weighted_cosine(q, k, half, half, 10.0) - cosine_similarity(q, k)) <= 1e-9);
    }
  }
  SUBCASE("equal inputs and gates give one") {
    const auto q = random_embedding(rng, 16);
    const Embedding w(random_vector(rng, 16, 0.5, 1.0));
    CHECK(weighted_cosine(q, q, w, w, 10.0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("agrees with cosine of explicitly weighted vectors for every beta") {
    for (int trial = 0; trial < 200; ++trial) {
      const auto q = random_vector(rng, 16);
      const auto k = random_vector(rng, 16);
      const auto w1 = random_vector(rng, 16, 0.5, 1.0);
      const auto w2 = random_vector(rng, 16, 0.5, 1.0);
      const double base = weighted_cosine(Embedding(q), Embedding(k), Embedding(w1), Embedding(w2), 1.0);
      for (double beta : {1.0, 10.0, 100.0}) {
        std::vector<double> a(16), b(16);
        for (std::size_t i = 0; i < 16; ++i) {
          a[i] = w1[i] * beta * q[i];
          b[i] = w2[i] * beta * k[i];
        }
        const double got =
            weighted_cosine(Embedding(q), Embedding(k), Embedding(w1), Embedding(w2), beta);
        CHECK(std::fabs(got - oracle::cosine(a, b)) <= 1e-9);
        CHECK(std::fabs(got - base) <= 1e-9);
      }
    }
  }
  SUBCASE("errors") {
    const Embedding one(std::vector<double>(4, 1.0));
    const Embedding zero(std::vector<double>(4, 0.0));
    CHECK_THROWS_AS(weighted_cosine(one, one, one, zero, 10.0), Error);
    CHECK_THROWS_AS(weighted_cosine(one, one, one, one, 0.0), Error);
    CHECK_THROWS_AS(weighted_cosine(one, Embedding({1.0, 2.0}), one, one, 10.0), Error);
  }
}

TEST_CASE("zero weight adapter preserves nearest-neighbour rankings") {
  std::mt19937_64 rng(7);
  const Adapter zero{AdapterKind::kWeight, MlpParams::zeros(16), 10.0, 0.6};
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = random_embedding(rng, 16);
    std::size_t raw_best = 0, adapted_best = 0;
    double raw_score = -2, adapted_score = -2;
    const auto aq = zero.apply(q);
    for (std::size_t t = 0; t < 10; ++t) {
      const auto k = random_embedding(rng, 16);
      const double r = cosine_similarity(q, k);
      const double a = cosine_similarity(aq, zero.apply(k));
      if (r > raw_score) raw_score = r, raw_best = t;
      if (a > adapted_score) adapted_score = a, adapted_best = t;
    }
    CHECK(raw_best == adapted_best);
  }
}
