#ifndef ZIGZAG_DIRAC_H
#define ZIGZAG_DIRAC_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. The first four match the command-line exit codes.
 */
typedef enum ZzStatus {
  ZZ_STATUS_OK = 0,
  ZZ_STATUS_CHECK_FAILED = 1,
  ZZ_STATUS_INVALID_INPUT = 2,
  ZZ_STATUS_NO_CONVERGENCE = 3,
  ZZ_STATUS_NULL_POINTER = 4,
  ZZ_STATUS_BUFFER_TOO_SMALL = 5,
  ZZ_STATUS_PANIC = 6,
} ZzStatus;

/*
 Which operator layout to assemble.
 */
typedef enum ZzVariant {
  /*
   Upper components on all nodes, lower components on interior nodes.
   */
  ZZ_VARIANT_ZIGZAG_A = 0,
  /*
   The chirality-equivalent layout with the roles swapped.
   */
  ZZ_VARIANT_ZIGZAG_B = 1,
} ZzVariant;

/*
 Voxelized domain.
 */
typedef struct ZzDomain ZzDomain;

/*
 Assembled sparse Hermitian operator.
 */
typedef struct ZzOperator ZzOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *zz_version(void);

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length excluding the NUL,
 or 0 when there is no error.

 # Safety
 `buf` must be valid for `len` bytes or null.
 */
size_t zz_last_error_message(char *buf, size_t len);

/*
 Voxelizes a domain given as JSON, e.g. `{"kind":"ball","center":[0,0,0],"radius":1}`.
 `bbox_min` and `bbox_max` point to three doubles each; when both are null
 the domain's bounding box is used.

 # Safety
 `spec_json` must be a NUL-terminated string; `out` must be writable; the
 box pointers must be null or valid for three doubles.
 */
enum ZzStatus zz_domain_voxelize(const char *spec_json,
                                 double h,
                                 const double *bbox_min,
                                 const double *bbox_max,
                                 struct ZzDomain **out);

/*
 Unit cube with `cells` cells per side.

 # Safety
 `out` must be writable.
 */
enum ZzStatus zz_domain_unit_cube(size_t cells, struct ZzDomain **out);

/*
 Node counts: all nodes, interior nodes.

 # Safety
 `domain` must come from this library; the outputs must be writable or null.
 */
enum ZzStatus zz_domain_counts(const struct ZzDomain *domain,
                               size_t *num_all,
                               size_t *num_interior);

/*
 # Safety
 `domain` must come from this library and not be used afterwards; null is ignored.
 */
void zz_domain_free(struct ZzDomain *domain);

/*
 Assembles the zigzag Dirac operator with mass `m`.

 # Safety
 `domain` must come from this library; `out` must be writable.
 */
enum ZzStatus zz_operator_assemble(const struct ZzDomain *domain,
                                   double m,
                                   enum ZzVariant variant,
                                   struct ZzOperator **out);

/*
 Dimension and stored entries of an operator.

 # Safety
 `op` must come from this library; the outputs must be writable or null.
 */
enum ZzStatus zz_operator_shape(const struct ZzOperator *op, size_t *dim, size_t *nnz);

/*
 `y = A x` with complex vectors stored as interleaved `re, im` pairs;
 `len` is the number of doubles in each buffer and must equal `2·dim`.

 # Safety
 `x` and `y` must be valid for `len` doubles and must not overlap.
 */
enum ZzStatus zz_operator_apply(const struct ZzOperator *op,
                                const double *x,
                                double *y,
                                size_t len);

/*
 All eigenvalues in ascending order via a dense solve. `written` receives
 the dimension; if `cap` is smaller, nothing is copied and
 `BufferTooSmall` is returned.

 # Safety
 `values` must be valid for `cap` doubles (or null with `cap = 0`);
 `written` must be writable.
 */
enum ZzStatus zz_operator_dense_eigenvalues(const struct ZzOperator *op,
                                            size_t dense_cap,
                                            double *values,
                                            size_t cap,
                                            size_t *written);

/*
 # Safety
 `op` must come from this library and not be used afterwards; null is ignored.
 */
void zz_operator_free(struct ZzOperator *op);

/*
 Verifies the map between the induced Laplacian and the Dirac spectrum on
 `window` clusters. Writes the JSON report to `report_json` (release with
 [`zz_string_free`]) and returns `CheckFailed` if any check fails.

 # Safety
 `domain` must come from this library; `report_json` must be writable.
 */
enum ZzStatus zz_verify_theorem(const struct ZzDomain *domain,
                                double m,
                                size_t window,
                                char **report_json);

/*
 # Safety
 `s` must come from this library and not be used afterwards; null is ignored.
 */
void zz_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZIGZAG_DIRAC_H */
