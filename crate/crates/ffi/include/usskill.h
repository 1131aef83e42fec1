#ifndef USSKILL_H
#define USSKILL_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum UsskillStatus {
  USSKILL_STATUS_OK = 0,
  USSKILL_STATUS_NULL_POINTER = 1,
  USSKILL_STATUS_INVALID_ARGUMENT = 2,
  USSKILL_STATUS_SHAPE_MISMATCH = 3,
  USSKILL_STATUS_DEGENERATE_QUATERNION = 4,
  USSKILL_STATUS_CONFIG_MISMATCH = 5,
  USSKILL_STATUS_IO = 6,
  USSKILL_STATUS_CORRUPT = 7,
  USSKILL_STATUS_CHECKSUM_MISMATCH = 8,
  USSKILL_STATUS_DIVERGED = 9,
  USSKILL_STATUS_PANIC = 10,
} UsskillStatus;

// Opaque trained-policy handle.
typedef struct UsskillPolicy UsskillPolicy;

// Opaque simulator handle.
typedef struct UsskillSimulator UsskillSimulator;

// Probe pose: position in meters and unit quaternion `(w, x, y, z)`.
typedef struct UsskillFrame {
  double position[3];
  double orientation[4];
} UsskillFrame;

// Translation increment and componentwise quaternion increment `(w, x, y, z)`.
typedef struct UsskillAction {
  double dp[3];
  double d_o[4];
} UsskillAction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *usskill_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len` bytes) and returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or valid for `len` writable bytes.
size_t usskill_last_error_message(char *buf, size_t len);

// Creates a simulator with the default phantom, environment and guide.
//
// # Safety
// `out` must be null or valid for one pointer write.
enum UsskillStatus usskill_simulator_new(struct UsskillSimulator **out);

// Creates a simulator from a run configuration file.
//
// # Safety
// `config_path` must be null or a NUL-terminated string; `out` must be null
// or valid for one pointer write.
enum UsskillStatus usskill_simulator_from_config(const char *config_path,
                                                 struct UsskillSimulator **out);

// Releases a simulator. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from `usskill_simulator_new*` not yet freed.
void usskill_simulator_free(struct UsskillSimulator *sim);

// Image dimensions rendered by this simulator.
//
// # Safety
// `sim` must be a live handle; `height` and `width` must be null or writable.
enum UsskillStatus usskill_simulator_image_size(const struct UsskillSimulator *sim,
                                                size_t *height,
                                                size_t *width);

// Draws a start pose from the annulus around the target.
//
// # Safety
// `sim` must be a live handle; `out` must be null or writable.
enum UsskillStatus usskill_simulator_sample_start(const struct UsskillSimulator *sim,
                                                  uint64_t seed,
                                                  struct UsskillFrame *out);

// Applies one capped, clamped action to `frame`.
//
// # Safety
// `sim` must be a live handle; `frame`, `action` and `out` must be null or valid.
enum UsskillStatus usskill_simulator_step(const struct UsskillSimulator *sim,
                                          const struct UsskillFrame *frame,
                                          const struct UsskillAction *action,
                                          struct UsskillFrame *out);

// Renders the image, contact wrench and ground-truth label at `frame`.
// `image` receives `height * width` row-major intensities; `wrench` receives
// force then torque.
//
// # Safety
// `sim` must be a live handle; `image` must be valid for `image_len` floats,
// `wrench` for 6 doubles and `label` for one byte.
enum UsskillStatus usskill_simulator_observe(const struct UsskillSimulator *sim,
                                             const struct UsskillFrame *frame,
                                             float *image,
                                             size_t image_len,
                                             double *wrench,
                                             uint8_t *label);

// The scripted guide's action at `frame` (zero once the state is acceptable).
//
// # Safety
// `sim` must be a live handle; `frame` and `out` must be null or valid.
enum UsskillStatus usskill_oracle_action(const struct UsskillSimulator *sim,
                                         const struct UsskillFrame *frame,
                                         struct UsskillAction *out);

// Loads a checkpoint. The architecture comes from `config_path`, or the
// default one when it is null; a mismatch is `USSKILL_STATUS_CONFIG_MISMATCH`.
//
// # Safety
// `checkpoint_path` must be a NUL-terminated string, `config_path` null or
// NUL-terminated, and `out` null or valid for one pointer write.
enum UsskillStatus usskill_policy_load(const char *checkpoint_path,
                                       const char *config_path,
                                       struct UsskillPolicy **out);

// Releases a policy. Null is ignored.
//
// # Safety
// `policy` must be null or a handle from `usskill_policy_load` not yet freed.
void usskill_policy_free(struct UsskillPolicy *policy);

// Predicts the next action and the state quality from one observation.
// The policy does not read the probe position, so none is passed.
//
// # Safety
// `policy` must be a live handle; `image` must be valid for `image_len`
// floats, `orientation` for 4 doubles, `wrench` for 6 doubles; `action` and
// `confidence` must be null or writable.
enum UsskillStatus usskill_policy_act(const struct UsskillPolicy *policy,
                                      const float *image,
                                      size_t image_len,
                                      const double *orientation,
                                      const double *wrench,
                                      struct UsskillAction *action,
                                      double *confidence);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USSKILL_H */
