#ifndef RCL_H
#define RCL_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RclStatus {
  RCL_STATUS_OK = 0,
  RCL_STATUS_INVALID_UTILITY = 1,
  RCL_STATUS_INVALID_INPUT = 2,
  RCL_STATUS_BAD_INIT = 3,
  // The solver stopped early; the partial result is still returned.
  RCL_STATUS_NOT_CONVERGED = 4,
  RCL_STATUS_INAPPLICABLE = 5,
  RCL_STATUS_QUADRATURE = 6,
  RCL_STATUS_IO = 7,
  RCL_STATUS_NULL_POINTER = 8,
  RCL_STATUS_BUFFER_TOO_SMALL = 9,
  RCL_STATUS_PANIC = 10,
} RclStatus;

// A reward vector with its solver diagnostics.
typedef struct RclRewards RclRewards;

// A parsed utility function.
typedef struct RclUtility RclUtility;

typedef struct RclSolverConfig {
  double grad_tol;
  size_t max_iters;
} RclSolverConfig;

typedef struct RclSolveInfo {
  double objective;
  size_t iterations;
  double grad_norm_final;
  bool converged;
  bool unique;
} RclSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Solver defaults: tolerance 1e-8, 50 000 iterations.
struct RclSolverConfig rcl_solver_config_default(void);

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *rcl_last_error_message(void);

const char *rcl_version(void);

// Parses a spec such as `power:gamma=0.5` or `negpow:gamma=1,ext=appendixA`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` valid for writes.
enum RclStatus rcl_utility_parse(const char *spec, struct RclUtility **out);

// # Safety
// `u` must be NULL or a handle from [`rcl_utility_parse`] not yet freed.
void rcl_utility_free(struct RclUtility *u);

// U(x). Singular families give -inf at x = 0.
//
// # Safety
// `u` must be a live handle and `out` valid for writes.
enum RclStatus rcl_utility_eval(const struct RclUtility *u, double x, double *out);

// Optimal rewards for n ranked completions. `cfg` may be NULL for defaults.
//
// # Safety
// `u` must be a live handle, `cfg` NULL or valid, `out` valid for writes.
enum RclStatus rcl_solve(const struct RclUtility *u,
                         size_t n,
                         const struct RclSolverConfig *cfg,
                         struct RclRewards **out);

// Rewards for Bradley–Terry–Luce scores `thetas[0..n]`.
//
// # Safety
// `thetas` must point to n readable doubles; other pointers as for [`rcl_solve`].
enum RclStatus rcl_solve_btl(const struct RclUtility *u,
                             const double *thetas,
                             size_t n,
                             const struct RclSolverConfig *cfg,
                             struct RclRewards **out);

// # Safety
// `r` must be NULL or a handle from a solve not yet freed.
void rcl_rewards_free(struct RclRewards *r);

// Number of rewards; 0 for NULL.
//
// # Safety
// `r` must be NULL or a live handle.
size_t rcl_rewards_len(const struct RclRewards *r);

// Copies the rewards into `buf`, which holds `cap` doubles.
//
// # Safety
// `r` must be a live handle and `buf` valid for `cap` writes.
enum RclStatus rcl_rewards_copy(const struct RclRewards *r, double *buf, size_t cap);

// # Safety
// `r` must be a live handle and `out` valid for writes.
enum RclStatus rcl_rewards_info(const struct RclRewards *r, struct RclSolveInfo *out);

// Shape parameters of the Beta limit law. Fails with
// [`RclStatus::Inapplicable`] when only an endpoint-mass bound is known or
// the utility is extended.
//
// # Safety
// `u` must be a live handle; `alpha` and `beta` valid for writes.
enum RclStatus rcl_limit_beta(const struct RclUtility *u, double *alpha, double *beta);

// KS distance between `samples[0..n]` and the limit law of `u`.
//
// # Safety
// `samples` must point to n readable doubles; `u` live; `out` writable.
enum RclStatus rcl_ks_distance(const double *samples,
                               size_t n,
                               const struct RclUtility *u,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCL_H */
