#ifndef TEBE_H
#define TEBE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TebeStatus {
  TEBE_STATUS_OK = 0,
  TEBE_STATUS_NULL_POINTER = 1,
  TEBE_STATUS_INVALID_ARGUMENT = 2,
  TEBE_STATUS_NO_CONVERGENCE = 3,
  TEBE_STATUS_OUT_OF_RANGE = 4,
  TEBE_STATUS_IO = 5,
  TEBE_STATUS_INTERNAL = 6,
} TebeStatus;

/**
 * A solved profile.
 */
typedef struct TebeProfile TebeProfile;

/**
 * Radial state `(u, u', v, v')` at one value of `tau`.
 */
typedef struct TebeState {
  double u;
  double du;
  double v;
  double dv;
} TebeState;

/**
 * Outcome of the nine bound checks. Bit `i - 1` of `failed_mask` is set
 * when check `i` failed.
 */
typedef struct TebeVerdict {
  bool passed;
  uint32_t failed_mask;
  /**
   * Smallest margin relative to its tolerance across all checks.
   */
  double min_relative_margin;
} TebeVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves for charge `k` at twist `zeta` with default settings.
 *
 * # Safety
 * `out` must be valid for writes. On success `*out` owns a profile that
 * must be released with [`tebe_profile_free`].
 */
enum TebeStatus tebe_solve(uint32_t k, double zeta, struct TebeProfile **out);

/**
 * Reads a solution file written by `tebe solve` or [`tebe_profile_save`].
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` valid for writes.
 */
enum TebeStatus tebe_profile_load(const char *path, struct TebeProfile **out);

/**
 * # Safety
 * `profile` must come from this library; `path` must be nul-terminated.
 */
enum TebeStatus tebe_profile_save(const struct TebeProfile *profile, const char *path);

/**
 * Releases a profile. Null is ignored.
 *
 * # Safety
 * `profile` must come from this library and not be used afterwards.
 */
void tebe_profile_free(struct TebeProfile *profile);

/**
 * Interpolated state at `tau`, including below the first grid point.
 *
 * # Safety
 * `profile` must come from this library and `out` be valid for writes.
 */
enum TebeStatus tebe_profile_eval(const struct TebeProfile *profile,
                                  double tau,
                                  struct TebeState *out);

/**
 * Charge, twist and the matching residual of the solve.
 *
 * # Safety
 * `profile` must come from this library; each output may be null.
 */
enum TebeStatus tebe_profile_info(const struct TebeProfile *profile,
                                  uint32_t *k,
                                  double *zeta,
                                  double *matching_residual);

/**
 * Runs the bound checks with the shipped constants.
 *
 * # Safety
 * `profile` must come from this library and `out` be valid for writes.
 */
enum TebeStatus tebe_profile_verify(const struct TebeProfile *profile, struct TebeVerdict *out);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *tebe_last_error(void);

const char *tebe_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEBE_H */
