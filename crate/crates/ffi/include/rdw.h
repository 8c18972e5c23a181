#ifndef RDW_H
#define RDW_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdwStatus {
  RDW_STATUS_OK = 0,
  RDW_STATUS_NULL_POINTER = 1,
  RDW_STATUS_INVALID_UTF8 = 2,
  RDW_STATUS_OUT_OF_RANGE = 3,
  RDW_STATUS_DOMAIN = 4,
  RDW_STATUS_CONFIG = 5,
  RDW_STATUS_VALIDATION = 6,
  RDW_STATUS_INVARIANT = 7,
  RDW_STATUS_IO = 8,
  RDW_STATUS_SERDE = 9,
  RDW_STATUS_PANIC = 10,
} RdwStatus;

/**
 * Trained predictor loaded from a checkpoint.
 */
typedef struct RdwModel RdwModel;

/**
 * Finished simulation run.
 */
typedef struct RdwSimulation RdwSimulation;

/**
 * One simulated tick of one user.
 */
typedef struct RdwFrame {
  uintptr_t tick;
  uintptr_t user;
  double physical_x;
  double physical_y;
  double physical_heading;
  double virtual_x;
  double virtual_y;
  double virtual_heading;
  /**
   * 1 when the user was reset on this tick.
   */
  uint8_t reset;
} RdwFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *rdw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rdw_version(void);

/**
 * Runs a simulation described by a TOML config (null for defaults).
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be valid
 * for writes.
 */
enum RdwStatus rdw_simulation_run(const char *config_toml, struct RdwSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`rdw_simulation_run`] not yet freed.
 */
void rdw_simulation_free(struct RdwSimulation *sim);

/**
 * Number of frames (ticks times users); 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uintptr_t rdw_simulation_frame_count(const struct RdwSimulation *sim);

/**
 * Number of resets over all users; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uintptr_t rdw_simulation_reset_count(const struct RdwSimulation *sim);

/**
 * Copies frame `index` (tick-major order) into `frame`.
 *
 * # Safety
 * `sim` must be a live handle and `frame` valid for writes.
 */
enum RdwStatus rdw_simulation_frame(const struct RdwSimulation *sim,
                                    uintptr_t index,
                                    struct RdwFrame *frame);

/**
 * Loads a checkpoint written by `rdw train` or `rdw compare`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum RdwStatus rdw_model_load(const char *path, struct RdwModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`rdw_model_load`] not yet freed.
 */
void rdw_model_free(struct RdwModel *model);

/**
 * Features per input step: 2 for physical-only models, 4 with virtual
 * positions; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t rdw_model_input_dim(const struct RdwModel *model);

/**
 * Predicts the next physical position from `steps` rows of `dim` features
 * (row-major, raw room meters).
 *
 * # Safety
 * `model` must be a live handle, `inputs` must hold `steps * dim` values and
 * `out_x`/`out_y` must be valid for writes.
 */
enum RdwStatus rdw_model_predict(const struct RdwModel *model,
                                 const double *inputs,
                                 uintptr_t steps,
                                 uintptr_t dim,
                                 double *out_x,
                                 double *out_y);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDW_H */
