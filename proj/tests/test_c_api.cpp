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

// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "instmatch/instmatch.h"

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("instmatch_capi_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

im_config* config(const char* text) {
  im_config* cfg = nullptr;
  REQUIRE(im_config_parse(text, &cfg) == IM_OK);
  return cfg;
}

const char* kSmallScene =
    "num_instances = 5\n"
    "templates_per_instance = 3\n"
    "dim = 16\n"
    "informative_channels = 0\n"
    "num_images = 3\n"
    "objects_per_image = 3\n"
    "seed = 2\n";

}  // namespace

TEST_CASE("status names and last error") {
  CHECK(std::string(im_status_name(IM_OK)) == "Ok");
  CHECK(std::string(im_status_name(IM_ERR_BAD_MAGIC)) == "BadMagic");
  CHECK(std::string(im_version()) == "1.0.0");
  im_container* c = nullptr;
  CHECK(im_container_read("/nonexistent/x.nids", &c) == IM_ERR_IO);
  CHECK(c == nullptr);
  CHECK(std::strlen(im_last_error()) > 0);
  CHECK(im_container_read(nullptr, &c) == IM_ERR_INVALID_ARGUMENT);
  im_config_free(nullptr);
  im_adapter_free(nullptr);
  im_container_free(nullptr);
}

TEST_CASE("container files with bad magic are reported") {
  Dir dir;
  std::ofstream(dir / "bad.nids", std::ios::binary) << "XXXX\x01\0\0\0";
  im_container* c = nullptr;
  CHECK(im_container_read((dir / "bad.nids").c_str(), &c) == IM_ERR_BAD_MAGIC);
}

TEST_CASE("configuration errors") {
  im_config* cfg = nullptr;
  CHECK(im_config_parse("bogus = 1\n", &cfg) == IM_ERR_CONFIG);
  REQUIRE(im_config_create(&cfg) == IM_OK);
  CHECK(im_config_set(cfg, "delta", "0.3") == IM_OK);
  CHECK(im_config_set(cfg, "nope", "1") == IM_ERR_CONFIG);
  im_config_free(cfg);
}

TEST_CASE("primitives") {
  const double q[3] = {1, 0, 0};
  const double k[3] = {1, 1, 0};
  double out = 0;
  REQUIRE(im_cosine(q, k, 3, &out) == IM_OK);
  CHECK(out == doctest::Approx(1.0 / std::sqrt(2.0)));
  const double z[3] = {0, 0, 0};
  CHECK(im_cosine(q, z, 3, &out) == IM_ERR_ZERO_VECTOR);

  // Both proposals prefer instance 0; proposal 1 holds the higher score.
  const double s[4] = {0.9, 0.8, 0.95, 0.1};
  int64_t inst[2];
  double sc[2];
  REQUIRE(im_assign_stable(s, 2, 2, inst, sc) == IM_OK);
  CHECK(inst[0] == 1);
  CHECK(inst[1] == 0);
  CHECK(sc[0] == 0.8);
  REQUIRE(im_assign_argmax(s, 2, 2, inst, sc) == IM_OK);
  CHECK(inst[0] == 0);
  CHECK(inst[1] == 0);
  const double one[2] = {0.7, 0.3};
  REQUIRE(im_assign_stable(one, 2, 1, inst, sc) == IM_OK);
  CHECK(inst[0] == 0);
  CHECK(inst[1] == -1);
  const double bad[1] = {NAN};
  CHECK(im_assign_stable(bad, 1, 1, inst, sc) == IM_ERR_NON_FINITE);
}

TEST_CASE("grad check through the C interface") {
  im_grad_check_result r{};
  REQUIRE(im_grad_check("weight", 8, 0, &r) == IM_OK);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.parameters_checked > 0);
  CHECK(im_grad_check("linear", 8, 0, &r) == IM_ERR_CONFIG);
}

TEST_CASE("end to end synthetic pipeline") {
  Dir dir;
  im_config* cfg = config(kSmallScene);
  REQUIRE(im_config_set(cfg, "sigma", "0") == IM_OK);
  REQUIRE(im_config_set(cfg, "epochs", "3") == IM_OK);
  REQUIRE(im_gen_synth(cfg, dir.path.c_str()) == IM_OK);

  im_adapter* adapter = nullptr;
  REQUIRE(im_adapter_train((dir / "templates.nids").c_str(), "weight", cfg, &adapter) == IM_OK);
  const double* loss = nullptr;
  size_t epochs = 0;
  REQUIRE(im_adapter_loss_history(adapter, &loss, &epochs) == IM_OK);
  CHECK(epochs == 3);
  size_t dim = 0;
  REQUIRE(im_adapter_dim(adapter, &dim) == IM_OK);
  CHECK(dim == 16);
  REQUIRE(im_adapter_save(adapter, (dir / "adapter.nids").c_str()) == IM_OK);
  REQUIRE(im_adapter_write_loss_csv(adapter, (dir / "loss.csv").c_str()) == IM_OK);

  im_adapter* loaded = nullptr;
  REQUIRE(im_adapter_load((dir / "adapter.nids").c_str(), &loaded) == IM_OK);
  std::vector<double> f(16, 0.25), a(16), b(16);
  f[3] = -1.0;
  REQUIRE(im_adapter_apply(adapter, f.data(), 16, a.data()) == IM_OK);
  REQUIRE(im_adapter_apply(loaded, f.data(), 16, b.data()) == IM_OK);
  CHECK(a == b);
  CHECK(im_adapter_apply(loaded, f.data(), 8, b.data()) == IM_ERR_DIM_MISMATCH);

  REQUIRE(im_match((dir / "templates.nids").c_str(), (dir / "queries.nids").c_str(), adapter, cfg,
                   -1, (dir / "pred.tsv").c_str()) == IM_OK);
  im_ap_result box{};
  REQUIRE(im_eval((dir / "pred.tsv").c_str(), (dir / "gt.tsv").c_str(), "box", nullptr, nullptr,
                  (dir / "report.json").c_str(), &box) == IM_OK);
  CHECK(box.ap == doctest::Approx(1.0));
  CHECK(box.num_ground_truth == 9);
  CHECK(fs::exists(dir / "report.json"));
  im_ap_result mask{};
  REQUIRE(im_eval((dir / "pred.tsv").c_str(), (dir / "gt.tsv").c_str(), "mask",
                  (dir / "queries.nids").c_str(), (dir / "gt_masks.nids").c_str(), nullptr,
                  &mask) == IM_OK);
  CHECK(mask.ap == doctest::Approx(1.0));
  CHECK(im_eval((dir / "pred.tsv").c_str(), (dir / "gt.tsv").c_str(), "mask", nullptr, nullptr,
                nullptr, &mask) == IM_ERR_INVALID_ARGUMENT);

  REQUIRE(im_refine(adapter, (dir / "templates.nids").c_str(), (dir / "refined.nids").c_str()) == IM_OK);
  CHECK(im_refine(adapter, (dir / "refined.nids").c_str(), (dir / "again.nids").c_str()) ==
        IM_ERR_INVALID_ARGUMENT);
  im_container* c = nullptr;
  REQUIRE(im_container_read((dir / "refined.nids").c_str(), &c) == IM_OK);
  size_t n = 0;
  REQUIRE(im_container_size(c, &n) == IM_OK);
  bool has_marker = false;
  for (size_t i = 0; i < n; ++i) {
    const char* name = nullptr;
    REQUIRE(im_container_record_name(c, i, &name) == IM_OK);
    has_marker = has_marker || std::string(name) == "refined";
  }
  CHECK(has_marker);
  const char* name = nullptr;
  CHECK(im_container_record_name(c, n, &name) == IM_ERR_INVALID_ARGUMENT);
  im_container_free(c);

  CHECK(im_match((dir / "missing.nids").c_str(), (dir / "queries.nids").c_str(), nullptr, nullptr,
                 -1, (dir / "p2.tsv").c_str()) == IM_ERR_IO);

  im_adapter_free(loaded);
  im_adapter_free(adapter);
  im_config_free(cfg);
}

TEST_CASE("run manifest is deterministic") {
  Dir dir;
  im_config* cfg = config(kSmallScene);
  REQUIRE(im_gen_synth(cfg, dir.path.c_str()) == IM_OK);
  im_config_free(cfg);
  std::ofstream(dir / "run.cfg") << "templates = templates.nids\nqueries = queries.nids\n"
                                    "gt = gt.tsv\ntrain = true\nadapter_kind = weight\nepochs = 5\n";
  im_ap_result r1{}, r2{};
  int evaluated = 0;
  REQUIRE(im_run_manifest((dir / "run.cfg").c_str(), (dir / "a.tsv").c_str(), nullptr, &r1,
                          &evaluated) == IM_OK);
  CHECK(evaluated == 1);
  REQUIRE(im_run_manifest((dir / "run.cfg").c_str(), (dir / "b.tsv").c_str(), nullptr, &r2,
                          &evaluated) == IM_OK);
  CHECK(r1.ap == r2.ap);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a.tsv") == slurp(dir / "b.tsv"));
  CHECK_FALSE(slurp(dir / "a.tsv").empty());
}
