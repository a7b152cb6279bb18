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

// Command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "instmatch/instmatch.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

int fail() {
  std::fprintf(stderr, "error: %s\n", im_last_error());
  return kExitData;
}

// Loads the config file when given, otherwise starts from defaults.
im_status load_config(const std::string& path, im_config** cfg) {
  return path.empty() ? im_config_create(cfg) : im_config_load(path.c_str(), cfg);
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot instance matching: adapters, matching and AP evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(im_version()));

  std::string config_path;
  std::string out_path;

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic template/query dataset");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--out", out_path, "Output directory")->required();

  std::string kind = "weight";
  std::string templates_path;
  std::string loss_csv;
  auto* train = app.add_subcommand("train-adapter", "Train an adapter on template embeddings");
  train->add_option("--kind", kind, "Adapter kind")
      ->required()
      ->check(CLI::IsMember({"weight", "clip"}));
  train->add_option("--templates", templates_path, "Template container")->required();
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--out", out_path, "Output parameter container")->required();
  train->add_option("--loss-csv", loss_csv, "Loss history CSV (default <out>.loss.csv)");

  std::string params_path;
  std::string in_path;
  auto* refine = app.add_subcommand("refine", "Apply a trained adapter to embeddings");
  refine->add_option("--params", params_path, "Adapter parameter container")->required();
  refine->add_option("--in", in_path, "Input container")->required();
  refine->add_option("--out", out_path, "Output container")->required();

  std::string queries_path;
  bool appearance = false;
  auto* match = app.add_subcommand("match", "Assign instance ids to proposals");
  match->add_option("--templates", templates_path, "Template container")->required();
  match->add_option("--queries", queries_path, "Query container")->required();
  match->add_option("--params", params_path, "Adapter parameter container");
  match->add_flag("--appearance", appearance, "Add the patch-level appearance score");
  match->add_option("--config", config_path, "key = value config file");
  match->add_option("--out", out_path, "Output records (TSV)")->required();

  std::string pred_path;
  std::string gt_path;
  std::string mode = "box";
  std::string pred_masks;
  std::string gt_masks;
  auto* eval = app.add_subcommand("eval", "Compute AP, AP50 and AP75");
  eval->add_option("--pred", pred_path, "Prediction records")->required();
  eval->add_option("--gt", gt_path, "Ground-truth records")->required();
  eval->add_option("--mode", mode, "IoU on boxes or masks")
      ->check(CLI::IsMember({"box", "mask"}));
  eval->add_option("--pred-masks", pred_masks, "Container with prediction masks");
  eval->add_option("--gt-masks", gt_masks, "Container with ground-truth masks");
  eval->add_option("--out", out_path, "JSON report");

  std::size_t dim = 8;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  auto* grad = app.add_subcommand("grad-check", "Compare backprop with finite differences");
  grad->add_option("--kind", kind, "Adapter kind")->check(CLI::IsMember({"weight", "clip"}));
  grad->add_option("--dim", dim, "Embedding dim (multiple of 4, at most 32)");
  grad->add_option("--seed", seed, "Data and parameter seed");
  grad->add_option("--tolerance", tolerance, "Largest accepted relative error");

  std::string manifest_path;
  std::string report_path;
  auto* run = app.add_subcommand("run", "Run match and eval from a manifest");
  run->add_option("--manifest", manifest_path, "Run manifest")->required();
  run->add_option("--out", out_path, "Output records (TSV)")->required();
  run->add_option("--report", report_path, "JSON report when the manifest names ground truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  im_config* cfg = nullptr;
  im_status st = IM_OK;

  if (gen->parsed()) {
    if ((st = load_config(config_path, &cfg)) == IM_OK) st = im_gen_synth(cfg, out_path.c_str());
    im_config_free(cfg);
    if (st != IM_OK) return fail();
    std::printf("wrote synthetic dataset to %s\n", out_path.c_str());
    return kExitOk;
  }

  if (train->parsed()) {
    im_adapter* adapter = nullptr;
    if ((st = load_config(config_path, &cfg)) == IM_OK) {
      st = im_adapter_train(templates_path.c_str(), kind.c_str(), cfg, &adapter);
    }
    im_config_free(cfg);
    if (st == IM_OK) st = im_adapter_save(adapter, out_path.c_str());
    if (loss_csv.empty()) loss_csv = out_path + ".loss.csv";
    if (st == IM_OK) st = im_adapter_write_loss_csv(adapter, loss_csv.c_str());
    const double* losses = nullptr;
    std::size_t epochs = 0;
    if (st == IM_OK) st = im_adapter_loss_history(adapter, &losses, &epochs);
    if (st == IM_OK && epochs > 0) {
      std::printf("trained %s adapter: %zu epochs, loss %.6g -> %.6g\n", kind.c_str(), epochs,
                  losses[0], losses[epochs - 1]);
    }
    im_adapter_free(adapter);
    return st == IM_OK ? kExitOk : fail();
  }

  if (refine->parsed()) {
    im_adapter* adapter = nullptr;
    st = im_adapter_load(params_path.c_str(), &adapter);
    if (st == IM_OK) st = im_refine(adapter, in_path.c_str(), out_path.c_str());
    im_adapter_free(adapter);
    return st == IM_OK ? kExitOk : fail();
  }

  if (match->parsed()) {
    im_adapter* adapter = nullptr;
    st = load_config(config_path, &cfg);
    if (st == IM_OK && !params_path.empty()) st = im_adapter_load(params_path.c_str(), &adapter);
    if (st == IM_OK) {
      st = im_match(templates_path.c_str(), queries_path.c_str(), adapter, cfg,
                    appearance ? 1 : -1, out_path.c_str());
    }
    im_adapter_free(adapter);
    im_config_free(cfg);
    return st == IM_OK ? kExitOk : fail();
  }

  if (eval->parsed()) {
    im_ap_result r{};
    st = im_eval(pred_path.c_str(), gt_path.c_str(), mode.c_str(), opt(pred_masks), opt(gt_masks),
                 opt(out_path), &r);
    if (st != IM_OK) return fail();
    std::printf("AP %.4f  AP50 %.4f  AP75 %.4f  (%zu predictions, %zu ground truth)\n", r.ap,
                r.ap50, r.ap75, r.num_predictions, r.num_ground_truth);
    return kExitOk;
  }

  if (grad->parsed()) {
    im_grad_check_result r{};
    st = im_grad_check(kind.c_str(), dim, seed, &r);
    if (st != IM_OK) return fail();
    const bool ok = r.max_relative_error <= tolerance;
    std::printf("max relative error %.3e over %zu parameters (%s, tolerance %.1e)\n",
                r.max_relative_error, r.parameters_checked, ok ? "ok" : "FAILED", tolerance);
    return ok ? kExitOk : kExitCheck;
  }

  if (run->parsed()) {
    im_ap_result r{};
    int evaluated = 0;
    st = im_run_manifest(manifest_path.c_str(), out_path.c_str(), opt(report_path), &r,
                         &evaluated);
    if (st != IM_OK) return fail();
    if (evaluated != 0) {
      std::printf("AP %.4f  AP50 %.4f  AP75 %.4f\n", r.ap, r.ap50, r.ap75);
    }
    return kExitOk;
  }
  return kExitUsage;
}
