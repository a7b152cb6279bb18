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

/* Stable C interface to the instmatch library.
 *
 * Every function returns an im_status. On failure a description of the most
 * recent error on the calling thread is available from im_last_error().
 * Objects are opaque and owned by the caller once returned; release them
 * with the matching *_free function. Passing NULL to a *_free function is a
 * no-op.
 */
#ifndef INSTMATCH_INSTMATCH_H_
#define INSTMATCH_INSTMATCH_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(INSTMATCH_BUILDING_LIBRARY)
#define IM_API __declspec(dllexport)
#else
#define IM_API __declspec(dllimport)
#endif
#else
#define IM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum im_status {
  IM_OK = 0,
  IM_ERR_INVALID_ARGUMENT = 1,
  IM_ERR_DIM_MISMATCH = 2,
  IM_ERR_NON_FINITE = 3,
  IM_ERR_EMPTY_FOREGROUND = 4,
  IM_ERR_ZERO_VECTOR = 5,
  IM_ERR_DEGENERATE_BATCH = 6,
  IM_ERR_INVALID_BOX = 7,
  IM_ERR_EMPTY_UNION = 8,
  IM_ERR_BAD_MAGIC = 9,
  IM_ERR_UNSUPPORTED_VERSION = 10,
  IM_ERR_TRUNCATED_FILE = 11,
  IM_ERR_CORRUPT_RECORD = 12,
  IM_ERR_DUPLICATE_NAME = 13,
  IM_ERR_UNKNOWN_DTYPE = 14,
  IM_ERR_MISSING_RECORD = 15,
  IM_ERR_IO = 16,
  IM_ERR_CONFIG = 17,
  IM_ERR_INTERNAL = 18
} im_status;

typedef struct im_config im_config;
typedef struct im_adapter im_adapter;
typedef struct im_container im_container;

typedef struct im_ap_result {
  double ap;
  double ap50;
  double ap75;
  double ap_per_iou[10]; /* IoU 0.50, 0.55, ..., 0.95 */
  size_t num_predictions;
  size_t num_ground_truth;
} im_ap_result;

typedef struct im_grad_check_result {
  double max_relative_error;
  size_t parameters_checked;
  size_t kink_nudges;
} im_grad_check_result;

IM_API const char* im_version(void);
IM_API const char* im_status_name(im_status status);
/* Message of the last failure on this thread; "" when none. */
IM_API const char* im_last_error(void);

/* ---- configuration (flat key = value text) ---- */
IM_API im_status im_config_create(im_config** out);
IM_API im_status im_config_parse(const char* text, im_config** out);
IM_API im_status im_config_load(const char* path, im_config** out);
/* Overrides or adds a key. Unknown keys are rejected. */
IM_API im_status im_config_set(im_config* cfg, const char* key, const char* value);
IM_API void im_config_free(im_config* cfg);

/* ---- adapters ---- */
/* kind is "weight" or "clip". cfg may be NULL for defaults. */
IM_API im_status im_adapter_train(const char* templates_path, const char* kind,
                                  const im_config* cfg, im_adapter** out);
IM_API im_status im_adapter_load(const char* path, im_adapter** out);
IM_API im_status im_adapter_save(const im_adapter* adapter, const char* path);
IM_API im_status im_adapter_dim(const im_adapter* adapter, size_t* dim);
/* out must hold dim values. */
IM_API im_status im_adapter_apply(const im_adapter* adapter, const double* in, size_t dim,
                                  double* out);
/* Per-epoch training loss; empty for loaded adapters. The pointer stays
 * valid until the adapter is freed. */
IM_API im_status im_adapter_loss_history(const im_adapter* adapter, const double** values,
                                         size_t* count);
IM_API im_status im_adapter_write_loss_csv(const im_adapter* adapter, const char* path);
IM_API void im_adapter_free(im_adapter* adapter);

/* ---- tensor containers ---- */
IM_API im_status im_container_read(const char* path, im_container** out);
IM_API im_status im_container_write(const im_container* c, const char* path);
IM_API im_status im_container_size(const im_container* c, size_t* count);
/* The name pointer stays valid until the container is freed. */
IM_API im_status im_container_record_name(const im_container* c, size_t index, const char** name);
IM_API void im_container_free(im_container* c);

/* ---- pipeline stages ---- */
/* Writes templates.nids, queries.nids, gt.tsv and gt_masks.nids into out_dir. */
IM_API im_status im_gen_synth(const im_config* cfg, const char* out_dir);
IM_API im_status im_refine(const im_adapter* adapter, const char* in_path, const char* out_path);
/* adapter and cfg may be NULL. appearance < 0 keeps the config value,
 * 0 disables and > 0 enables the appearance bonus. */
IM_API im_status im_match(const char* templates_path, const char* queries_path,
                          const im_adapter* adapter, const im_config* cfg, int appearance,
                          const char* out_records_path);
/* mode is "box" or "mask". Mask mode needs both mask containers. report_path
 * and result may be NULL. */
IM_API im_status im_eval(const char* pred_path, const char* gt_path, const char* mode,
                         const char* pred_masks_path, const char* gt_masks_path,
                         const char* report_path, im_ap_result* result);
/* Compares analytic and finite-difference gradients (N=3, K=2, h=1e-5). */
IM_API im_status im_grad_check(const char* kind, size_t dim, uint64_t seed,
                               im_grad_check_result* result);
/* Runs match (training first when the manifest sets train = true) and, when
 * the manifest names ground truth, eval. report_path and result may be NULL;
 * *evaluated tells whether an evaluation took place. */
IM_API im_status im_run_manifest(const char* manifest_path, const char* out_records_path,
                                 const char* report_path, im_ap_result* result, int* evaluated);

/* ---- primitives ---- */
IM_API im_status im_cosine(const double* q, const double* k, size_t dim, double* out);
/* scores is rows x cols, row-major. instance[r] receives the column or -1. */
IM_API im_status im_assign_stable(const double* scores, size_t rows, size_t cols,
                                  int64_t* instance, double* score);
IM_API im_status im_assign_argmax(const double* scores, size_t rows, size_t cols,
                                  int64_t* instance, double* score);

#ifdef __cplusplus
}
#endif

#endif /* INSTMATCH_INSTMATCH_H_ */
