#ifndef HYPDELAY_H
#define HYPDELAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Feedback law for [`hd_simulate`].
 */
typedef enum HdController {
  HD_CONTROLLER_OPEN_LOOP = 0,
  HD_CONTROLLER_NOMINAL = 1,
  HD_CONTROLLER_COMPENSATED = 2,
} HdController;

/**
 * Characteristic function used by [`hd_robust_scan`].
 */
typedef enum HdForm {
  HD_FORM_LOOP = 0,
  HD_FORM_DISPLAYED = 1,
} HdForm;

/**
 * Result codes.
 */
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_POINTER = 1,
  HD_STATUS_INVALID_ARGUMENT = 2,
  HD_STATUS_GRID_MISMATCH = 3,
  HD_STATUS_NO_CONVERGENCE = 4,
  HD_STATUS_CFL_VIOLATION = 5,
  HD_STATUS_NON_FINITE_STATE = 6,
  HD_STATUS_INCONCLUSIVE_CONTOUR = 7,
  HD_STATUS_BUFFER_TOO_SMALL = 8,
  HD_STATUS_PANIC = 99,
} HdStatus;

/**
 * Every kernel for one plant and grid.
 */
typedef struct HdKernels HdKernels;

/**
 * Plant description.
 */
typedef struct HdPlant HdPlant;

/**
 * A finished simulation.
 */
typedef struct HdTrajectory HdTrajectory;

/**
 * Summary of a robustness scan.
 */
typedef struct HdScanSummary {
  size_t zero_count;
  double winding;
  double min_abs_contour;
  /**
   * 1 when the verdict is stable.
   */
  int32_t stable;
} HdScanSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hd_version(void);

/**
 * Plant with constant coefficients. `tau_bar` is the delay the controller
 * assumes.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HdStatus hd_plant_new(double eps1,
                           double eps2,
                           double c1,
                           double c2,
                           double q,
                           double tau,
                           double tau_bar,
                           struct HdPlant **out);

/**
 * # Safety
 * `plant` must come from [`hd_plant_new`] and not be used afterwards.
 */
void hd_plant_free(struct HdPlant *plant);

/**
 * Finite settling time `tau + phi1(1) + phi2(1)` on an `n`-node grid.
 *
 * # Safety
 * `plant` must be a live handle and `out` writable.
 */
enum HdStatus hd_plant_t_final(const struct HdPlant *plant, size_t n, double *out);

/**
 * Solves every kernel of `plant` on an `n`-node grid.
 *
 * # Safety
 * `plant` must be a live handle and `out` writable.
 */
enum HdStatus hd_kernels_build(const struct HdPlant *plant, size_t n, struct HdKernels **out);

/**
 * # Safety
 * `kernels` must come from [`hd_kernels_build`] and not be used afterwards.
 */
void hd_kernels_free(struct HdKernels *kernels);

/**
 * Number of grid nodes (length of every trace), 0 for a null handle.
 *
 * # Safety
 * `kernels` must be null or a live handle.
 */
size_t hd_kernels_grid_n(const struct HdKernels *kernels);

/**
 * Copies the controller's history weight `p` (built with `tau_bar`).
 *
 * # Safety
 * `kernels` must be a live handle and `out` must hold `len` doubles.
 */
enum HdStatus hd_kernels_gain_p(const struct HdKernels *kernels, double *out, size_t len);

/**
 * Copies the inverse-map weight `mu` (built with the true delay).
 *
 * # Safety
 * `kernels` must be a live handle and `out` must hold `len` doubles.
 */
enum HdStatus hd_kernels_gain_mu(const struct HdKernels *kernels, double *out, size_t len);

/**
 * Copies the state gains `alpha1(1,.)` and `alpha2(1,.)`.
 *
 * # Safety
 * `kernels` must be a live handle; `a1` and `a2` must each hold `len` doubles.
 */
enum HdStatus hd_kernels_state_gains(const struct HdKernels *kernels,
                                     double *a1,
                                     double *a2,
                                     size_t len);

/**
 * Simulates from `u1 = u2 = sin(2 pi x)` on the kernel grid.
 *
 * # Safety
 * `plant` and `kernels` must be live handles and `out` writable.
 */
enum HdStatus hd_simulate(const struct HdPlant *plant,
                          const struct HdKernels *kernels,
                          enum HdController controller,
                          double dt,
                          double t_end,
                          struct HdTrajectory **out);

/**
 * # Safety
 * `traj` must come from [`hd_simulate`] and not be used afterwards.
 */
void hd_trajectory_free(struct HdTrajectory *traj);

/**
 * Number of recorded steps (including `t = 0`), 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t hd_trajectory_len(const struct HdTrajectory *traj);

/**
 * Copies the per-step times, L2 norms and controls. Any of the three
 * buffers may be null to skip it.
 *
 * # Safety
 * `traj` must be a live handle; non-null buffers must hold `len` doubles.
 */
enum HdStatus hd_trajectory_series(const struct HdTrajectory *traj,
                                   double *times,
                                   double *l2,
                                   double *control,
                                   size_t len);

/**
 * Scans the right half plane for zeros of the mismatch characteristic
 * function.
 *
 * # Safety
 * `kernels` must be a live handle and `out` writable.
 */
enum HdStatus hd_robust_scan(const struct HdKernels *kernels,
                             enum HdForm form,
                             double sigma_max,
                             double omega_max,
                             size_t n_im,
                             size_t n_re,
                             struct HdScanSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPDELAY_H */
