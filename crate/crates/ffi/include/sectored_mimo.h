#ifndef SECTORED_MIMO_H
#define SECTORED_MIMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_NULL_POINTER = 1,
  SM_STATUS_INVALID_ARGUMENT = 2,
  SM_STATUS_INVALID_CONFIG = 3,
  SM_STATUS_SOLVER_FAILURE = 4,
  SM_STATUS_IO = 5,
  SM_STATUS_INTERNAL = 6,
} SmStatus;

typedef enum SmAntennaMode {
  SM_ANTENNA_MODE_DIRECTIONAL = 0,
  SM_ANTENNA_MODE_OMNI = 1,
} SmAntennaMode;

typedef enum SmScheme {
  SM_SCHEME_UPA = 0,
  SM_SCHEME_CPA = 1,
  SM_SCHEME_DPA = 2,
} SmScheme;

/**
 * Network configuration handle.
 */
typedef struct SmConfig SmConfig;

/**
 * Finished scenario handle.
 */
typedef struct SmRun SmRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sm_last_error(void);

/**
 * New configuration with the built-in defaults. Never returns null.
 */
struct SmConfig *sm_config_new(void);

/**
 * Parses a TOML configuration document into `*out`.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SmStatus sm_config_from_toml(const char *toml, struct SmConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void sm_config_free(struct SmConfig *cfg);

/**
 * Sets the number of cells (1, 7 or 19) and users per cell.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SmStatus sm_config_set_size(struct SmConfig *cfg, size_t cells, size_t users_per_cell);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum SmStatus sm_config_set_seed(struct SmConfig *cfg, uint64_t seed);

/**
 * Writes the configuration as TOML into `buf` (NUL-terminated) and the
 * required size including the terminator into `*needed`. A null or short
 * buffer only reports the size.
 *
 * # Safety
 * `cfg` must be a live handle; `buf` must hold `len` bytes; `needed` must be valid.
 */
enum SmStatus sm_config_to_toml(const struct SmConfig *cfg, char *buf, size_t len, size_t *needed);

/**
 * Runs a scenario over `n_mb` values of total elements per base station.
 * `threads == 0` uses all cores. On success `*out` receives a run handle.
 *
 * # Safety
 * `cfg` must be a live handle, `mb` must point to `n_mb` doubles and `out`
 * must be valid.
 */
enum SmStatus sm_run_scenario(const struct SmConfig *cfg,
                              enum SmAntennaMode mode,
                              enum SmScheme scheme,
                              const double *mb,
                              size_t n_mb,
                              size_t n_drops,
                              size_t threads,
                              struct SmRun **out);

/**
 * # Safety
 * `run` must come from this library and not be used afterwards. Null is ignored.
 */
void sm_run_free(struct SmRun *run);

/**
 * Number of `M_B` sweep points in the run, or 0 for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
size_t sm_run_num_sweeps(const struct SmRun *run);

/**
 * Number of per-user rows of sweep `index`.
 *
 * # Safety
 * `run` must be a live handle and `out` valid.
 */
enum SmStatus sm_run_num_rows(const struct SmRun *run, size_t index, size_t *out);

/**
 * Copies the per-user rates (bits/s/Hz) of sweep `index` into `buf`,
 * which must hold at least `sm_run_num_rows` entries.
 *
 * # Safety
 * `run` must be a live handle and `buf` must hold `len` doubles.
 */
enum SmStatus sm_run_rates(const struct SmRun *run, size_t index, double *buf, size_t len);

/**
 * Rate achieved by 95% of users in sweep `index`.
 *
 * # Safety
 * `run` must be a live handle and `out` valid.
 */
enum SmStatus sm_run_likely_rate_95(const struct SmRun *run, size_t index, double *out);

/**
 * Writes the CSV and summary files of every sweep point into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated path.
 */
enum SmStatus sm_run_export(const struct SmRun *run, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SECTORED_MIMO_H */
