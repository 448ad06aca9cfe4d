/* Copyright 2026 The csran authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C API of the csran text sequence matching library.
 *
 * All state lives behind opaque handles; every call returns a status code and
 * csran_last_error() describes the most recent failure on the calling thread.
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with csran_string_free().
 */

#ifndef CSRAN_H
#define CSRAN_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#if defined(CSRAN_BUILD)
#define CSRAN_API __declspec(dllexport)
#else
#define CSRAN_API __declspec(dllimport)
#endif
#else
#define CSRAN_API __attribute__((visibility("default")))
#endif

typedef enum csran_status {
  CSRAN_OK = 0,
  CSRAN_ERR_CONFIG = 1,    /* invalid configuration or usage */
  CSRAN_ERR_DATA = 2,      /* unreadable or malformed data */
  CSRAN_ERR_IO = 3,        /* filesystem failure */
  CSRAN_ERR_TOLERANCE = 4, /* a checked tolerance was breached */
  CSRAN_ERR_RUNTIME = 5,   /* numeric or internal failure */
  CSRAN_ERR_ARG = 6        /* null or invalid argument */
} csran_status;

typedef struct csran_config csran_config; /* run configuration */
typedef struct csran_model csran_model;   /* loaded checkpoint */

CSRAN_API const char* csran_version(void);

/* Thread-local message for the last failing call. */
CSRAN_API const char* csran_last_error(void);

CSRAN_API void csran_string_free(char* s);

/* ------------------------------------------------------------------ */
/* configuration                                                       */

CSRAN_API csran_status csran_config_create(csran_config** out);
CSRAN_API void csran_config_destroy(csran_config* cfg);

/* Flat `key = value` file; later csran_config_set calls override it. */
CSRAN_API csran_status csran_config_load_file(csran_config* cfg, const char* path);
CSRAN_API csran_status csran_config_set(csran_config* cfg, const char* key, const char* value);
CSRAN_API csran_status csran_config_get(const csran_config* cfg, const char* key, char* buf,
                                        size_t buflen);

/* ------------------------------------------------------------------ */
/* commands (mirror the CLI subcommands)                               */

/* Trains a model; writes checkpoint.csran, history.tsv and dev_report.txt
 * under out_dir. *report_out receives a short summary. */
CSRAN_API csran_status csran_train(const csran_config* cfg, char** report_out);

/* Evaluates cfg->checkpoint on cfg->test_file (or synthetic data) and
 * returns the task's metric block. */
CSRAN_API csran_status csran_eval(const csran_config* cfg, char** report_out);

/* Central-difference gradient check of a tiny full model; returns the
 * per-parameter-group report. CSRAN_ERR_TOLERANCE when a group fails. */
CSRAN_API csran_status csran_gradcheck(const csran_config* cfg, char** report_out);

/* Trains the four ablation variants (original, no_mar, no_csra, no_both)
 * with shared seeds and returns the comparison table. */
CSRAN_API csran_status csran_ablate(const csran_config* cfg, char** report_out);

/* Trains CSRAN and the plain stacked baseline at each depth in the
 * comma-separated list; returns depth \t variant \t dev metric rows. */
CSRAN_API csran_status csran_depth_sweep(const csran_config* cfg, const char* depths_csv,
                                         char** report_out);

/* ------------------------------------------------------------------ */
/* models                                                              */

CSRAN_API csran_status csran_model_open(const char* checkpoint_path, csran_model** out);
CSRAN_API void csran_model_close(csran_model* m);

/* JSON description: task, precision, architecture, parameter count. */
CSRAN_API csran_status csran_model_info(const csran_model* m, char** json_out);

/* Scores one raw text pair. Writes per-class probabilities into scores
 * (scores_len >= number of classes); *written receives the class count. */
CSRAN_API csran_status csran_model_score_pair(const csran_model* m, const char* text_a,
                                              const char* text_b, double* scores,
                                              size_t scores_len, size_t* written);

#ifdef __cplusplus
}
#endif

#endif /* CSRAN_H */
