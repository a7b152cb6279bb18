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

#include "instmatch/instmatch.h"

#include <cmath>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "instmatch/config.hpp"
#include "instmatch/container.hpp"
#include "instmatch/error.hpp"
#include "instmatch/evaluation.hpp"
#include "instmatch/pipeline.hpp"
#include "instmatch/records.hpp"
#include "instmatch/synth.hpp"
#include "instmatch/trainer.hpp"

struct im_config {
  instmatch::KeyValueConfig cfg;
};

struct im_adapter {
  instmatch::Adapter adapter;
  std::vector<double> loss_history;
};

struct im_container {
  instmatch::TensorContainer container;
};

namespace {

using instmatch::Error;
using instmatch::ErrorCode;

thread_local std::string g_last_error;

im_status to_status(ErrorCode code) {
  // The C enum mirrors ErrorCode one-to-one, offset by one for IM_OK.
  return static_cast<im_status>(static_cast<int>(code) + 1);
}

template <typename F>
im_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return IM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return IM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return IM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

instmatch::KeyValueConfig config_or_default(const im_config* cfg) {
  return cfg != nullptr ? cfg->cfg : instmatch::KeyValueConfig{};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

void fill_result(const instmatch::ApResult& r, std::size_t preds, std::size_t gts,
                 im_ap_result* out) {
  if (out == nullptr) return;
  out->ap = r.ap;
  out->ap50 = r.ap50;
  out->ap75 = r.ap75;
  for (std::size_t t = 0; t < instmatch::kNumIouThresholds; ++t) {
    out->ap_per_iou[t] = r.ap_per_threshold[t];
  }
  out->num_predictions = preds;
  out->num_ground_truth = gts;
}

instmatch::Adapter train_from(const std::string& templates_path, instmatch::AdapterKind kind,
                              const instmatch::KeyValueConfig& cfg,
                              std::vector<double>* loss_history) {
  const auto tcfg = instmatch::train_config_from(cfg, kind);
  const auto templates =
      instmatch::templates_from_container(instmatch::TensorContainer::read_file(templates_path));
  if (templates.refined) {
    throw Error(ErrorCode::kInvalidArgument, "cannot train on refined template embeddings");
  }
  auto result = instmatch::train_adapter(templates.template_set(), kind, tcfg);
  if (loss_history != nullptr) *loss_history = std::move(result.loss_history);
  return instmatch::Adapter{kind, std::move(result.params), tcfg.beta, tcfg.alpha};
}

std::vector<instmatch::LabeledProposal> run_match(const std::string& templates_path,
                                                  const std::string& queries_path,
                                                  const std::optional<instmatch::Adapter>& adapter,
                                                  const instmatch::MatcherConfig& mcfg) {
  const auto templates =
      instmatch::templates_from_container(instmatch::TensorContainer::read_file(templates_path));
  const auto queries =
      instmatch::queries_from_container(instmatch::TensorContainer::read_file(queries_path));
  return instmatch::match_queries(templates, queries, adapter, mcfg);
}

instmatch::ApResult run_eval(std::vector<instmatch::LabeledProposal> preds,
                             std::vector<instmatch::LabeledProposal> gt_records,
                             instmatch::EvalMode mode, const char* pred_masks,
                             const char* gt_masks) {
  if (mode == instmatch::EvalMode::kMask) {
    if (pred_masks == nullptr || gt_masks == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "mask evaluation needs prediction and gt masks");
    }
    instmatch::attach_masks(preds, instmatch::TensorContainer::read_file(pred_masks));
    instmatch::attach_masks(gt_records, instmatch::TensorContainer::read_file(gt_masks));
  }
  const auto gt = instmatch::ground_truth_from_records(gt_records);
  return instmatch::compute_ap(preds, gt, mode);
}

}  // namespace

extern "C" {

const char* im_version(void) { return "1.0.0"; }

const char* im_status_name(im_status status) {
  if (status == IM_OK) return "Ok";
  if (status == IM_ERR_INTERNAL) return "Internal";
  if (status > IM_OK && status < IM_ERR_INTERNAL) {
    return instmatch::error_code_name(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
  }
  return "Unknown";
}

const char* im_last_error(void) { return g_last_error.c_str(); }

im_status im_config_create(im_config** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = new im_config{};
  });
}

im_status im_config_parse(const char* text, im_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "text and out must not be null");
    *out = new im_config{instmatch::KeyValueConfig::parse(text)};
  });
}

im_status im_config_load(const char* path, im_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    *out = new im_config{instmatch::KeyValueConfig::load(path)};
  });
}

im_status im_config_set(im_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "arguments must not be null");
    // Route through the parser so unknown keys fail the same way as in files.
    auto single = instmatch::KeyValueConfig::parse(std::string(key) + " = " + value);
    for (const auto& [k, v] : single.values()) cfg->cfg.set(k, v);
  });
}

void im_config_free(im_config* cfg) { delete cfg; }

im_status im_adapter_train(const char* templates_path, const char* kind, const im_config* cfg,
                           im_adapter** out) {
  return guarded([&] {
    require(templates_path != nullptr && kind != nullptr && out != nullptr,
            "templates_path, kind and out must not be null");
    auto* a = new im_adapter{};
    try {
      a->adapter = train_from(templates_path, instmatch::parse_adapter_kind(kind),
                              config_or_default(cfg), &a->loss_history);
    } catch (...) {
      delete a;
      throw;
    }
    *out = a;
  });
}

im_status im_adapter_load(const char* path, im_adapter** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    *out = new im_adapter{
        instmatch::adapter_from_container(instmatch::TensorContainer::read_file(path)), {}};
  });
}

im_status im_adapter_save(const im_adapter* adapter, const char* path) {
  return guarded([&] {
    require(adapter != nullptr && path != nullptr, "adapter and path must not be null");
    instmatch::adapter_to_container(adapter->adapter).write_file(path);
  });
}

im_status im_adapter_dim(const im_adapter* adapter, size_t* dim) {
  return guarded([&] {
    require(adapter != nullptr && dim != nullptr, "adapter and dim must not be null");
    *dim = adapter->adapter.dim();
  });
}

im_status im_adapter_apply(const im_adapter* adapter, const double* in, size_t dim, double* out) {
  return guarded([&] {
    require(adapter != nullptr && in != nullptr && out != nullptr, "arguments must not be null");
    if (dim != adapter->adapter.dim()) {
      throw Error(ErrorCode::kDimMismatch, "input dim differs from adapter dim");
    }
    const auto r = adapter->adapter.apply(instmatch::Embedding(std::vector<double>(in, in + dim)));
    std::copy(r.values().begin(), r.values().end(), out);
  });
}

im_status im_adapter_loss_history(const im_adapter* adapter, const double** values,
                                  size_t* count) {
  return guarded([&] {
    require(adapter != nullptr && values != nullptr && count != nullptr,
            "arguments must not be null");
    *values = adapter->loss_history.data();
    *count = adapter->loss_history.size();
  });
}

im_status im_adapter_write_loss_csv(const im_adapter* adapter, const char* path) {
  return guarded([&] {
    require(adapter != nullptr && path != nullptr, "adapter and path must not be null");
    instmatch::write_loss_csv(path, adapter->loss_history);
  });
}

void im_adapter_free(im_adapter* adapter) { delete adapter; }

im_status im_container_read(const char* path, im_container** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    *out = new im_container{instmatch::TensorContainer::read_file(path)};
  });
}

im_status im_container_write(const im_container* c, const char* path) {
  return guarded([&] {
    require(c != nullptr && path != nullptr, "container and path must not be null");
    c->container.write_file(path);
  });
}

im_status im_container_size(const im_container* c, size_t* count) {
  return guarded([&] {
    require(c != nullptr && count != nullptr, "container and count must not be null");
    *count = c->container.size();
  });
}

im_status im_container_record_name(const im_container* c, size_t index, const char** name) {
  return guarded([&] {
    require(c != nullptr && name != nullptr, "container and name must not be null");
    require(index < c->container.size(), "record index out of range");
    *name = c->container.records()[index].name.c_str();
  });
}

void im_container_free(im_container* c) { delete c; }

im_status im_gen_synth(const im_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir must not be null");
    const auto scfg = instmatch::synth_config_from(config_or_default(cfg));
    instmatch::write_synth(instmatch::gen_synth(scfg), out_dir);
  });
}

im_status im_refine(const im_adapter* adapter, const char* in_path, const char* out_path) {
  return guarded([&] {
    require(adapter != nullptr && in_path != nullptr && out_path != nullptr,
            "arguments must not be null");
    instmatch::refine_container(adapter->adapter, instmatch::TensorContainer::read_file(in_path))
        .write_file(out_path);
  });
}

im_status im_match(const char* templates_path, const char* queries_path,
                   const im_adapter* adapter, const im_config* cfg, int appearance,
                   const char* out_records_path) {
  return guarded([&] {
    require(templates_path != nullptr && queries_path != nullptr && out_records_path != nullptr,
            "paths must not be null");
    auto mcfg = instmatch::matcher_config_from(config_or_default(cfg));
    if (appearance >= 0) mcfg.use_appearance_bonus = appearance > 0;
    std::optional<instmatch::Adapter> a;
    if (adapter != nullptr) a = adapter->adapter;
    const auto records = run_match(templates_path, queries_path, a, mcfg);
    instmatch::write_records(std::filesystem::path(out_records_path), records);
  });
}

im_status im_eval(const char* pred_path, const char* gt_path, const char* mode,
                  const char* pred_masks_path, const char* gt_masks_path, const char* report_path,
                  im_ap_result* result) {
  return guarded([&] {
    require(pred_path != nullptr && gt_path != nullptr && mode != nullptr,
            "pred_path, gt_path and mode must not be null");
    const auto m = instmatch::parse_eval_mode(mode);
    auto preds = instmatch::read_records(std::filesystem::path(pred_path));
    auto gts = instmatch::read_records(std::filesystem::path(gt_path));
    const std::size_t np = preds.size();
    const std::size_t ng = gts.size();
    const auto ap = run_eval(std::move(preds), std::move(gts), m, pred_masks_path, gt_masks_path);
    if (report_path != nullptr) write_text(report_path, instmatch::ap_report_json(ap, m, np, ng));
    fill_result(ap, np, ng, result);
  });
}

im_status im_grad_check(const char* kind, size_t dim, uint64_t seed,
                        im_grad_check_result* result) {
  return guarded([&] {
    require(kind != nullptr && result != nullptr, "kind and result must not be null");
    instmatch::GradCheckOptions opts;
    opts.kind = instmatch::parse_adapter_kind(kind);
    opts.dim = dim;
    opts.seed = seed;
    const auto r = instmatch::grad_check(opts);
    result->max_relative_error = r.max_relative_error;
    result->parameters_checked = r.parameters_checked;
    result->kink_nudges = r.kink_nudges;
  });
}

im_status im_run_manifest(const char* manifest_path, const char* out_records_path,
                          const char* report_path, im_ap_result* result, int* evaluated) {
  return guarded([&] {
    require(manifest_path != nullptr && out_records_path != nullptr,
            "manifest_path and out_records_path must not be null");
    const auto m = instmatch::RunManifest::load(manifest_path);
    const auto mcfg = instmatch::matcher_config_from(m.settings);
    std::optional<instmatch::Adapter> adapter;
    if (m.params) {
      adapter = instmatch::adapter_from_container(instmatch::TensorContainer::read_file(*m.params));
    } else if (m.settings.get_bool("train", false)) {
      const auto kind = m.settings.get("adapter_kind");
      if (!kind) throw Error(ErrorCode::kConfig, "train = true needs adapter_kind");
      adapter = train_from(m.templates.string(), instmatch::parse_adapter_kind(*kind), m.settings,
                           nullptr);
    }
    const auto records = run_match(m.templates.string(), m.queries.string(), adapter, mcfg);
    instmatch::write_records(std::filesystem::path(out_records_path), records);
    if (evaluated != nullptr) *evaluated = 0;
    if (!m.ground_truth) return;
    const auto mode = instmatch::parse_eval_mode(m.settings.get("eval_mode").value_or("box"));
    const std::string pred_masks = m.queries.string();
    const std::string gt_masks = m.ground_truth_masks ? m.ground_truth_masks->string() : "";
    auto gts = instmatch::read_records(*m.ground_truth);
    const std::size_t ng = gts.size();
    const auto ap = run_eval(records, std::move(gts), mode, pred_masks.c_str(),
                             m.ground_truth_masks ? gt_masks.c_str() : nullptr);
    if (report_path != nullptr) {
      write_text(report_path, instmatch::ap_report_json(ap, mode, records.size(), ng));
    }
    fill_result(ap, records.size(), ng, result);
    if (evaluated != nullptr) *evaluated = 1;
  });
}

im_status im_cosine(const double* q, const double* k, size_t dim, double* out) {
  return guarded([&] {
    require(q != nullptr && k != nullptr && out != nullptr, "arguments must not be null");
    *out = instmatch::cosine_similarity(std::span(q, dim), std::span(k, dim));
  });
}

namespace {

im_status assign_with(std::vector<instmatch::InstanceAssignment> (*fn)(
                          const instmatch::ScoreMatrix&),
                      const double* scores, size_t rows, size_t cols, int64_t* instance,
                      double* score) {
  return guarded([&] {
    require(instance != nullptr && score != nullptr, "outputs must not be null");
    require(scores != nullptr || rows * cols == 0, "scores must not be null");
    for (std::size_t i = 0; i < rows * cols; ++i) {
      if (!std::isfinite(scores[i])) throw Error(ErrorCode::kNonFinite, "score matrix");
    }
    const instmatch::ScoreMatrix m(rows, cols, std::vector<double>(scores, scores + rows * cols));
    const auto a = fn(m);
    for (std::size_t r = 0; r < rows; ++r) {
      instance[r] = a[r].instance ? static_cast<int64_t>(*a[r].instance) : -1;
      score[r] = a[r].score;
    }
  });
}

}  // namespace

im_status im_assign_stable(const double* scores, size_t rows, size_t cols, int64_t* instance,
                           double* score) {
  return assign_with(&instmatch::assign_stable, scores, rows, cols, instance, score);
}

im_status im_assign_argmax(const double* scores, size_t rows, size_t cols, int64_t* instance,
                           double* score) {
  return assign_with(&instmatch::assign_argmax, scores, rows, cols, instance, score);
}

}  // extern "C"
