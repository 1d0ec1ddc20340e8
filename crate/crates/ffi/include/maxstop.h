/* C interface to the maxstop investment-timing solver. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_INPUT = 2,
  MS_STATUS_SOLVER_FAILURE = 3,
  MS_STATUS_UTF8 = 4,
  MS_STATUS_PANIC = 5,
} MsStatus;

/**
 * Region labels returned by `ms_region`.
 */
typedef enum MsRegion {
  MS_REGION_STOP = 0,
  MS_REGION_LEFT_OF_STOP = 1,
  MS_REGION_RIGHT_OF_STOP = 2,
  MS_REGION_BELOW_MLOW = 3,
} MsRegion;

/**
 * Opaque solver handle: a solved instance plus its value surface.
 */
typedef struct MsSolver MsSolver;

/**
 * Simulation output.
 */
typedef struct MsSimResult {
  double estimate;
  double std_error;
  uint64_t n_stopped;
  uint64_t n_truncated;
  double truncation_bound;
} MsSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/**
 * Copy the last error message (UTF-8, NUL-terminated, truncated to `len`)
 * into `buf`; returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be null to query the size).
 */
uintptr_t ms_last_error(char *buf, uintptr_t len);

/**
 * Build a solver from a JSON problem config (same schema as the CLI) and
 * solve the free boundary.
 *
 * # Safety
 * `config_json` must be a NUL-terminated UTF-8 string; `out` must be a
 * valid pointer. On success `*out` owns the solver and must be released
 * with [`ms_solver_free`].
 */
enum MsStatus ms_solver_new(const char *config_json, struct MsSolver **out);

/**
 * Release a solver handle.
 *
 * # Safety
 * `solver` must be a pointer returned by [`ms_solver_new`] that has not
 * been freed yet, or null.
 */
void ms_solver_free(struct MsSolver *solver);

/**
 * Endpoint m̲ of the stopping region.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_m_low(const struct MsSolver *solver, double *out);

/**
 * Stand-alone threshold x_R.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_x_r(const struct MsSolver *solver, double *out);

/**
 * Truncation horizon of the solved boundary grid.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_horizon(const struct MsSolver *solver, double *out);

/**
 * Boundary b(m) for m ≥ m̲ (extrapolated beyond the horizon).
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_boundary_at(const struct MsSolver *solver, double m, double *out);

/**
 * Value surface W(x, m).
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_value(const struct MsSolver *solver, double x, double m, double *out);

/**
 * Initial value V̄(x) = W(x, x) + F(x)G(x).
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_initial_value(const struct MsSolver *solver, double x, double *out);

/**
 * ∂W/∂x(x, m).
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_partial_x(const struct MsSolver *solver, double x, double m, double *out);

/**
 * ∂W/∂m(x, m); `right_side` selects the regime at the kink m = m̲.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_partial_m(const struct MsSolver *solver,
                           double x,
                           double m,
                           bool right_side,
                           double *out);

/**
 * Region classification of (x, m).
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_region(const struct MsSolver *solver, double x, double m, enum MsRegion *out);

/**
 * Monte Carlo value of stopping (X, M) at the solved boundary from
 * (x, m). Non-positive `t_max` selects the default horizon.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_simulate_stopped(const struct MsSolver *solver,
                                  double x,
                                  double m,
                                  uint64_t n_paths,
                                  double dt,
                                  double t_max,
                                  uint64_t seed,
                                  struct MsSimResult *out);

/**
 * Monte Carlo value of the original game from the diagonal start (x, x)
 * under the boundary policy.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_simulate_game(const struct MsSolver *solver,
                               double x,
                               uint64_t n_paths,
                               double dt,
                               double t_max,
                               uint64_t seed,
                               struct MsSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
