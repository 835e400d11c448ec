#ifndef NKL_H
#define NKL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  NKL_BOUNDARY_NEUMANN = 0,
  NKL_BOUNDARY_DIRICHLET = 1,
} NklBoundary;

typedef enum {
  NKL_STATUS_OK = 0,
  NKL_STATUS_NULL_POINTER = 1,
  /*
   Bad argument, model, grid or configuration.
   */
  NKL_STATUS_INVALID_ARGUMENT = 2,
  /*
   A numerical diagnostic fired (no convergence, quadrature, overflow).
   */
  NKL_STATUS_NUMERICAL = 3,
  /*
   The output buffer length does not match.
   */
  NKL_STATUS_BUFFER_SIZE = 4,
  NKL_STATUS_PANIC = 5,
} NklStatus;

/*
 Eigendecomposition handle.
 */
typedef struct NklDecomposition NklDecomposition;

/*
 Density model handle.
 */
typedef struct NklModel NklModel;

/*
 Assembled operator handle.
 */
typedef struct NklOperator NklOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next `nkl_*` call on this thread.
 */
const char *nkl_last_error_message(void);

/*
 Library version, statically allocated.
 */
const char *nkl_version(void);

/*
 Builds a model from JSON such as `{"family": "cauchy", "beta": 2}`.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
NklStatus nkl_model_from_json(const char *json, NklModel **out);

/*
 # Safety
 `model` must come from [`nkl_model_from_json`] and not be freed twice. Null is ignored.
 */
void nkl_model_free(NklModel *model);

/*
 # Safety
 `model` must be a live handle and `out` writable.
 */
NklStatus nkl_model_rho(const NklModel *model, double x, double *out);

/*
 `-AV/V` at `x` for `V = rho^{-1/2}`.

 # Safety
 `model` must be a live handle and `out` writable.
 */
NklStatus nkl_model_minus_av_over_v(const NklModel *model, double x, double *out);

/*
 # Safety
 `model` must be a live handle and `out` writable.
 */
NklStatus nkl_model_lyapunov_constant(const NklModel *model, double *out);

/*
 Divergence-form operator on `n` nodes of `[-l, l]`.

 # Safety
 `model` must be a live handle and `out` writable.
 */
NklStatus nkl_operator_assemble(const NklModel *model,
                                double l,
                                size_t n,
                                NklBoundary bc,
                                NklOperator **out);

/*
 # Safety
 `op` must come from [`nkl_operator_assemble`] and not be freed twice. Null is ignored.
 */
void nkl_operator_free(NklOperator *op);

/*
 Number of grid nodes, or 0 for a null handle.

 # Safety
 `op` must be null or a live handle.
 */
size_t nkl_operator_len(const NklOperator *op);

/*
 `out = A_h f`; both buffers hold `len` values, which must equal the node count.

 # Safety
 `f` must be readable and `out` writable for `len` values.
 */
NklStatus nkl_operator_apply(const NklOperator *op, const double *f, double *out, size_t len);

/*
 # Safety
 `op` must be a live handle and `out` writable.
 */
NklStatus nkl_decompose(const NklOperator *op, NklDecomposition **out);

/*
 # Safety
 `dec` must come from [`nkl_decompose`] and not be freed twice. Null is ignored.
 */
void nkl_decomposition_free(NklDecomposition *dec);

/*
 Eigenvalues in ascending order into `out[0..len]`; `len` must equal the node count.

 # Safety
 `dec` must be a live handle and `out` writable for `len` values.
 */
NklStatus nkl_decomposition_eigenvalues(const NklDecomposition *dec, double *out, size_t len);

/*
 Kernel of `exp(-t A^alpha)` with respect to the weighted measure, row-major
 into `out[0..len]` with `len = n * n`.

 # Safety
 `dec` must be a live handle and `out` writable for `len` values.
 */
NklStatus nkl_kernel(const NklDecomposition *dec, double t, double alpha, double *out, size_t len);

/*
 Runs one named scenario and writes its report as a JSON string to `out`.
 `config_json` may be null for the defaults. A scenario that runs but does
 not pass still returns `Ok`; the report's `status` field says `fail`.

 # Safety
 `name` must be a NUL-terminated string, `config_json` null or one, and
 `out` writable. Free the result with [`nkl_string_free`].
 */
NklStatus nkl_run_scenario(const char *name, const char *config_json, char **out);

/*
 # Safety
 `s` must come from this library and not be freed twice. Null is ignored.
 */
void nkl_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NKL_H */
