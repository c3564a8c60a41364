/*
 * Copyright 2026 The flowsiam Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface of the flowsiam library. All functions return an fs_status;
 * on failure fs_last_error() describes the problem for the calling thread.
 * Handles are opaque and released with the matching *_free function. */

#ifndef FLOWSIAM_FLOWSIAM_H_
#define FLOWSIAM_FLOWSIAM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FLOWSIAM_BUILDING_LIBRARY)
#    define FS_API __declspec(dllexport)
#  else
#    define FS_API __declspec(dllimport)
#  endif
#else
#  define FS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fs_status {
  FS_OK = 0,
  FS_ERR_INVALID_ARGUMENT = 1,
  FS_ERR_IO = 2,
  FS_ERR_PARSE = 3,
  FS_ERR_VERSION = 4,
  FS_ERR_SHAPE = 5,
  FS_ERR_NUMERIC = 6,
  FS_ERR_STATE = 7,
  FS_ERR_INTERNAL = 8,
  FS_ERR_NULL_ARGUMENT = 9,
  FS_ERR_BUFFER_TOO_SMALL = 10,
  FS_ERR_BARS_FAILED = 11
} fs_status;

typedef struct fs_config fs_config;
typedef struct fs_dataset fs_dataset;
typedef struct fs_model fs_model;

FS_API const char* fs_version(void);
FS_API const char* fs_status_string(fs_status status);
/* Message of the last failure on this thread, "" if none. */
FS_API const char* fs_last_error(void);

/* Caps worker threads; 0 restores the hardware default. Results do not
 * depend on the thread count. */
FS_API void fs_set_max_threads(size_t n);
/* Progress messages on stderr when nonzero. */
FS_API void fs_set_verbose(int on);

/* Run configuration: the desk defaults, a config file, or key overrides
 * such as ("train.epochs_max", "100"). */
FS_API fs_status fs_config_default(fs_config** out);
FS_API fs_status fs_config_load(const char* path, fs_config** out);
FS_API fs_status fs_config_set(fs_config* cfg, const char* key, const char* value);
/* Current value of a key; strings are returned without quotes. Buffer
 * rules as for fs_config_to_text. */
FS_API fs_status fs_config_get(const fs_config* cfg, const char* key, char* buf, size_t cap,
                               size_t* needed);
/* Applies FLOWSIAM_SEED when set in the environment. */
FS_API fs_status fs_config_apply_env(fs_config* cfg);
FS_API fs_status fs_config_seed(const fs_config* cfg, uint64_t* seed);
/* Writes the canonical text form. *needed receives the size including the
 * terminating NUL; buf may be NULL to query it. */
FS_API fs_status fs_config_to_text(const fs_config* cfg, char* buf, size_t cap, size_t* needed);
FS_API void fs_config_free(fs_config* cfg);

FS_API fs_status fs_dataset_load(const char* path, fs_dataset** out);
FS_API fs_status fs_dataset_save(const fs_dataset* d, const char* path);
FS_API fs_status fs_dataset_counts(const fs_dataset* d, size_t* flows, size_t* trajectories,
                                   size_t* abnormal);
/* Floating-car data (CSV, or XML for a .xml path) grouped into fleets. */
FS_API fs_status fs_import_fcd(const char* path, size_t fleet_size, size_t steps,
                               fs_dataset** out);
FS_API void fs_dataset_free(fs_dataset* d);

FS_API fs_status fs_model_load(const char* path, fs_model** out);
FS_API fs_status fs_model_save(const fs_model* m, const char* path);
FS_API fs_status fs_model_dims(const fs_model* m, size_t* d, size_t* h1, size_t* latent,
                               size_t* steps);
/* window: rows x cols row-major, already normalised. latent receives
 * `latent` values from fs_model_dims. */
FS_API fs_status fs_model_encode(const fs_model* m, const double* window, size_t rows,
                                 size_t cols, double* latent, size_t latent_cap);
FS_API void fs_model_free(fs_model* m);

/* Batch commands. */
FS_API fs_status fs_cmd_generate(const fs_config* cfg, const char* out_dir);
/* resume_model and log_out may be NULL. */
FS_API fs_status fs_cmd_train(const fs_config* cfg, const char* train_path, const char* model_out,
                              const char* log_out, const char* resume_model);
/* metric: "mse" | "cosine"; score_mode: "canonical" | "paper-eq4". theta may
 * be NULL for scores without decisions. */
FS_API fs_status fs_cmd_score(const char* model_path, const char* dataset_path,
                              const char* metric, const char* score_mode, const char* out_path,
                              const double* theta);
FS_API fs_status fs_cmd_evaluate(const fs_config* cfg, const char* model_path,
                                 const char* calibration_path, const char* test_path,
                                 const char* out_dir);
/* Returns FS_ERR_BARS_FAILED when the run completes but a bar fails. */
FS_API fs_status fs_cmd_repro(const fs_config* cfg, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* FLOWSIAM_FLOWSIAM_H_ */
