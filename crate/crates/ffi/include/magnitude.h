#ifndef MAGNITUDE_H
#define MAGNITUDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MagStatus {
  MAG_STATUS_OK = 0,
  MAG_STATUS_NULL_POINTER = 1,
  MAG_STATUS_INVALID_UTF8 = 2,
  MAG_STATUS_PARSE = 3,
  MAG_STATUS_VALIDATION = 4,
  MAG_STATUS_RUN = 5,
  MAG_STATUS_NOT_FOUND = 6,
  MAG_STATUS_IO = 7,
  MAG_STATUS_PANIC = 8,
} MagStatus;

// A parsed model together with the directory its data files are read from.
typedef struct MagModel MagModel;

// The time series of one simulation run.
typedef struct MagRunResult MagRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string. Do not free.
const char *mag_version(void);

// Message describing the last failed call on this thread, or an empty
// string. Valid until the next call into the library on this thread.
const char *mag_last_error_message(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void mag_string_free(char *s);

// Parse `.mag` text. `base_dir` (nullable) is where data files are read
// from; without it only inline series can be used. Syntax errors give
// `Parse`; the model is not validated here.
//
// # Safety
// Pointers must be valid NUL-terminated strings or null where allowed.
enum MagStatus mag_model_parse(const char *text, const char *base_dir, struct MagModel **out);

// Read and parse a `.mag` file; data paths resolve against its directory.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` writable.
enum MagStatus mag_model_parse_file(const char *path, struct MagModel **out);

// # Safety
// `model` must come from `mag_model_parse*` and not have been freed.
void mag_model_free(struct MagModel *model);

// SHA-256 fingerprint of the model as 64 hex characters.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum MagStatus mag_model_fingerprint(const struct MagModel *model, char **out);

// Diagnostics as `{"diagnostics": [...]}`. Succeeds even when the model
// has errors; inspect the severities.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum MagStatus mag_model_validate_json(const struct MagModel *model, char **out);

// Canonical `.mag` text of the model.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum MagStatus mag_model_serialize(const struct MagModel *model, char **out);

// Feedback loops of the influence diagram as JSON. Zero limits select
// the defaults.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum MagStatus mag_model_loops_json(const struct MagModel *model,
                                    size_t max_len,
                                    size_t max_count,
                                    char **out);

// Simulate one scenario. `scenario` names a scenario declared in the model
// (null means `baseline`); `scenario_json`, when not null, supplies the
// scenario inline and takes precedence.
//
// # Safety
// Pointers must be valid or null where allowed; `out` must be writable.
enum MagStatus mag_run(const struct MagModel *model,
                       const char *scenario,
                       const char *scenario_json,
                       struct MagRunResult **out);

// # Safety
// `result` must come from `mag_run` and not have been freed.
void mag_run_result_free(struct MagRunResult *result);

// Number of grid points (steps + 1) of every series.
//
// # Safety
// `result` must be a live handle or null (which yields 0).
size_t mag_run_result_len(const struct MagRunResult *result);

// Copy series `id` into `buf`, which holds `cap` values. `written`
// receives the series length; `buf` may be null to query it.
//
// # Safety
// `buf` must hold `cap` doubles when not null.
enum MagStatus mag_run_result_series(const struct MagRunResult *result,
                                     const char *id,
                                     double *buf,
                                     size_t cap,
                                     size_t *written);

// CSV export: `t` then one column per series.
//
// # Safety
// `result` must be a live handle and `out` writable.
enum MagStatus mag_run_result_to_csv(const struct MagRunResult *result, char **out);

// JSON export of the whole run.
//
// # Safety
// `result` must be a live handle and `out` writable.
enum MagStatus mag_run_result_to_json(const struct MagRunResult *result, char **out);

// Run scenarios and compare their indicators with `baseline`.
// `scenarios_json` is a JSON array of scenario names (null runs the
// baseline and every declared scenario); `indicators_json` a JSON array of indicators (null
// uses the model's own).
//
// # Safety
// Pointers must be valid or null where allowed; `out` must be writable.
enum MagStatus mag_compare_json(const struct MagModel *model,
                                const char *baseline,
                                const char *scenarios_json,
                                const char *indicators_json,
                                char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGNITUDE_H */
