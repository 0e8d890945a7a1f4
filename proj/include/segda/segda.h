// Copyright 2026 The segda Authors. All Rights Reserved.
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

#ifndef SEGDA_SEGDA_H_
#define SEGDA_SEGDA_H_

/* C interface to the segda library.
 *
 * Every call returns a segda_status. On failure a one-line description is
 * available from segda_last_error() on the calling thread until its next
 * failing call. Handles are opaque and must be released with their destroy
 * function; destroy functions accept NULL. */

#include <stddef.h>
#include <stdint.h>

#if defined(SEGDA_BUILDING)
#define SEGDA_API __attribute__((visibility("default")))
#else
#define SEGDA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum segda_status {
  SEGDA_OK = 0,
  SEGDA_ERR_INVALID_ARGUMENT = 1,
  SEGDA_ERR_SHAPE_MISMATCH = 2,
  SEGDA_ERR_NON_FINITE = 3,
  SEGDA_ERR_IO = 4,
  SEGDA_ERR_FORMAT = 5,
  SEGDA_ERR_CONFIG = 6,
  SEGDA_ERR_STATE = 7,
  SEGDA_ERR_INTERNAL = 99
} segda_status;

typedef struct segda_config segda_config;
typedef struct segda_model segda_model;

SEGDA_API const char* segda_last_error(void);
SEGDA_API const char* segda_status_name(segda_status status);
SEGDA_API const char* segda_version(void);

/* Configuration: defaults, a key = value file, then per-key overrides. */
SEGDA_API segda_status segda_config_create(segda_config** out);
SEGDA_API segda_status segda_config_load(const char* path, segda_config** out);
SEGDA_API segda_status segda_config_set(segda_config* cfg, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf. *needed receives the size
 * including the terminator; buf may be NULL to query it. A buf shorter than
 * that is an INVALID_ARGUMENT error. */
SEGDA_API segda_status segda_config_get(const segda_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
SEGDA_API segda_status segda_config_write(const segda_config* cfg, const char* path);
/* Resolved "key = value" text of every key, same sizing rules as _get. */
SEGDA_API segda_status segda_config_text(const segda_config* cfg, char* buf, size_t cap, size_t* needed);
SEGDA_API void segda_config_destroy(segda_config* cfg);

/* Known keys, sorted. The strings are static. */
SEGDA_API size_t segda_config_key_count(void);
SEGDA_API segda_status segda_config_key(size_t index, const char** name, const char** default_value,
                                        const char** help);

/* Writes the synthetic benchmark (source/, target/, val/, manifest.txt). */
SEGDA_API segda_status segda_generate_data(const segda_config* cfg, const char* out_dir);

/* Low-frequency amplitude transfer from target_png onto source_png. */
SEGDA_API segda_status segda_translate_png(const char* source_png, const char* target_png, double window_ratio,
                                           const char* out_png);

/* out[0] = total, out[1..3] = weighted level terms (pyramid) or zeros (exact). */
SEGDA_API segda_status segda_disparity_files(const char* label_a, const char* label_b, int num_classes, int exact,
                                             double out[4]);

/* Mines pairs between a target query label map and a source key label map
 * using the pair.* keys of cfg; writes the pair CSV. */
SEGDA_API segda_status segda_mine_pairs_files(const segda_config* cfg, const char* query_label, const char* key_label,
                                              int pseudo, const char* out_csv, size_t* num_pairs);

/* Two-phase training; checkpoints, metrics and the resolved config go to out_dir. */
SEGDA_API segda_status segda_train(const segda_config* cfg, const char* out_dir, double* val_miou);

SEGDA_API segda_status segda_model_load(const char* checkpoint, segda_model** out);
/* Argmax labels as an index PNG and, if color_png is not NULL, a palette PNG. */
SEGDA_API segda_status segda_model_segment(const segda_model* model, const char* image_png, const char* label_png,
                                           const char* color_png);
SEGDA_API void segda_model_destroy(segda_model* model);

/* Scores a checkpoint on the validation scenes of cfg's dataset; writes
 * iou.csv and prediction PNGs to out_dir when it is not NULL. */
SEGDA_API segda_status segda_evaluate(const segda_config* cfg, const char* checkpoint, const char* out_dir,
                                      double* miou);

/* Runs one sweep axis for each seed; writes ablation_<axis>.csv in out_dir. */
SEGDA_API segda_status segda_ablate(const segda_config* cfg, const char* axis, const uint64_t* seeds,
                                    size_t num_seeds, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif  // SEGDA_SEGDA_H_
