#ifndef ADAPTED_OT_H
#define ADAPTED_OT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum AotStatus {
  AOT_STATUS_OK = 0,
  AOT_STATUS_NULL_POINTER = 1,
  AOT_STATUS_DIMENSION = 2,
  AOT_STATUS_RANGE = 3,
  AOT_STATUS_NON_FINITE = 4,
  AOT_STATUS_NOT_SYMMETRIC = 5,
  AOT_STATUS_NOT_PSD = 6,
  AOT_STATUS_PRECONDITION = 7,
  AOT_STATUS_NO_CONVERGENCE = 8,
  AOT_STATUS_CONSISTENCY = 9,
  AOT_STATUS_PANIC = 10,
  AOT_STATUS_OTHER = 11,
} AotStatus;

// Opaque block lower-triangular factor in 𝓛(N, d).
typedef struct AotFactor AotFactor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread; never null.
const char *aot_last_error(void);

// Creates a factor from a row-major `(n_steps*dim)²` array. Entries above
// the block diagonal must be zero.
//
// # Safety
// `data` must point to `(n_steps*dim)²` doubles and `out` must be writable.
enum AotStatus aot_factor_new(const double *data,
                              uintptr_t n_steps,
                              uintptr_t dim,
                              struct AotFactor **out);

// Releases a factor. Null is ignored.
//
// # Safety
// `f` must be null or a handle from this library that was not yet freed.
void aot_factor_free(struct AotFactor *f);

// Number of time steps N, or 0 for a null handle.
//
// # Safety
// `f` must be null or a live handle.
uintptr_t aot_factor_n_steps(const struct AotFactor *f);

// Spatial dimension d, or 0 for a null handle.
//
// # Safety
// `f` must be null or a live handle.
uintptr_t aot_factor_dim(const struct AotFactor *f);

// Copies the factor into `out` (row-major, `len` ≥ (N*d)² doubles).
//
// # Safety
// `f` must be a live handle and `out` must hold `len` doubles.
enum AotStatus aot_factor_copy(const struct AotFactor *f, double *out, uintptr_t len);

// Minimal Cholesky factor of an n×n PSD matrix, written row-major to `out`.
//
// # Safety
// `a` and `out` must each hold n² doubles.
enum AotStatus aot_minimal_cholesky(const double *a, uintptr_t n, double *out);

// Bures–Wasserstein distance between two n×n covariances.
//
// # Safety
// `a` and `b` must each hold n² doubles; `out` must be writable.
enum AotStatus aot_bures_wasserstein(const double *a, const double *b, uintptr_t n, double *out);

// `dist_AW(L, M)`.
//
// # Safety
// `l`, `m` must be live handles; `out` must be writable.
enum AotStatus aot_dist_aw(const struct AotFactor *l, const struct AotFactor *m, double *out);

// Adapted Wasserstein distance between `(mean_x, L)` and `(mean_y, M)`.
// A null mean is read as zero.
//
// # Safety
// Non-null means must hold N*d doubles; handles must be live.
enum AotStatus aot_aw2_filtered(const double *mean_x,
                                const struct AotFactor *l,
                                const double *mean_y,
                                const struct AotFactor *m,
                                double *out);

// Adapted Brenier divergence `D_AB(L, M)` (squared scale).
//
// # Safety
// Handles must be live; `out` must be writable.
enum AotStatus aot_adapted_brenier_divergence(const struct AotFactor *l,
                                              const struct AotFactor *m,
                                              double *out);

// AW-optimal correlation blocks `P_1 … P_N`, each d×d row-major, written
// consecutively to `out` (`len` ≥ N*d*d).
//
// # Safety
// Handles must be live; `out` must hold `len` doubles.
enum AotStatus aot_optimal_aw_correlation(const struct AotFactor *l,
                                          const struct AotFactor *m,
                                          double *out,
                                          uintptr_t len);

// Nearest martingale factor; the new handle must be freed by the caller.
//
// # Safety
// `l` must be live; `out` must be writable.
enum AotStatus aot_martingale_projection(const struct AotFactor *l, struct AotFactor **out);

// Lower-triangular representative `L Q` with non-negative diagonal.
//
// # Safety
// `l` must be live; `out` must be writable.
enum AotStatus aot_canonical_block_lower(const struct AotFactor *l, struct AotFactor **out);

// Factor of the geodesic point at `u ∈ [0, 1]` between zero-mean processes.
//
// # Safety
// Handles must be live; `out` must be writable.
enum AotStatus aot_geodesic_factor(const struct AotFactor *l0,
                                   const struct AotFactor *l1,
                                   double u,
                                   struct AotFactor **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAPTED_OT_H */
