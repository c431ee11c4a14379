#ifndef SAC_H
#define SAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SacStatus {
  SAC_STATUS_OK = 0,
  SAC_STATUS_INVALID_ARGUMENT = 1,
  SAC_STATUS_NULL_POINTER = 2,
  SAC_STATUS_DIMENSION_MISMATCH = 3,
  SAC_STATUS_DEGENERATE_FIT = 4,
  SAC_STATUS_BUFFER_TOO_SMALL = 5,
  SAC_STATUS_INTERNAL = 99,
} SacStatus;

/**
 * Scheme at a fixed resolution together with its noise tape.
 */
typedef struct SacSimulator SacSimulator;

typedef struct SacBounds {
  double lower;
  double upper;
} SacBounds;

typedef struct SacRateFit {
  double slope;
  double intercept;
  double residual;
} SacRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 */
const char *sac_last_error_message(void);

const char *sac_version(void);

/**
 * `‖O_T − P_N O_T‖` for the linear heat equation.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum SacStatus sac_spatial_error_exact(size_t n, double t, double nu, double *out);

/**
 * `‖P_N O_T − O^{M,N}_T‖`; `n = 0` selects all modes.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum SacStatus sac_temporal_error_exact(size_t m, size_t n, double t, double nu, double *out);

/**
 * `‖O_T − O^{M,N}_T‖`; `n = 0` selects all modes.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum SacStatus sac_full_error_exact(size_t m, size_t n, double t, double nu, double *out);

/**
 * # Safety
 * `out` must be valid for a write of one `SacBounds`.
 */
enum SacStatus sac_bounds_temporal(size_t m, size_t n, double t, double nu, struct SacBounds *out);

/**
 * # Safety
 * `out` must be valid for a write of one `SacBounds`.
 */
enum SacStatus sac_bounds_spatial(size_t n, double t, double nu, struct SacBounds *out);

/**
 * # Safety
 * `out` must be valid for a write of one `SacBounds`.
 */
enum SacStatus sac_bounds_full(size_t m, size_t n, double t, double nu, struct SacBounds *out);

/**
 * Least-squares fit of `ln y` against `ln x`.
 *
 * # Safety
 * `xs` and `ys` must point to `len` readable doubles; `out` must be valid
 * for a write of one `SacRateFit`.
 */
enum SacStatus sac_fit_rate(const double *xs, const double *ys, size_t len, struct SacRateFit *out);

/**
 * Creates a simulator for `F(v) = Σ a_k v^k` with initial sine
 * coefficients `xi[0..xi_len]` (`xi` may be null when `xi_len = 0`).
 *
 * # Safety
 * `a` must point to 4 readable doubles, `xi` to `xi_len` readable doubles,
 * and `out` must be valid for a pointer write. Release the handle with
 * [`sac_simulator_free`].
 */
enum SacStatus sac_simulator_new(double t,
                                 double nu,
                                 const double *a,
                                 const double *xi,
                                 size_t xi_len,
                                 size_t m,
                                 size_t n,
                                 double gamma,
                                 double chi,
                                 uint64_t seed,
                                 size_t m_master,
                                 size_t n_master,
                                 struct SacSimulator **out);

/**
 * Number of modes `N` of the simulator, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle from [`sac_simulator_new`].
 */
size_t sac_simulator_modes(const struct SacSimulator *sim);

/**
 * Simulates path `path` and writes `Y_T` (`N` doubles) and the number of
 * steps with the drift suppressed.
 *
 * # Safety
 * `sim` must be a live handle, `out_y` must be valid for `out_len` writes
 * and `out_truncated` null or valid for one write.
 */
enum SacStatus sac_simulator_run(const struct SacSimulator *sim,
                                 uint64_t path,
                                 double *out_y,
                                 size_t out_len,
                                 size_t *out_truncated);

/**
 * # Safety
 * `sim` must be null or a handle from [`sac_simulator_new`] not yet freed.
 */
void sac_simulator_free(struct SacSimulator *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAC_H */
