#ifndef PLUS_H
#define PLUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Event that ends a path segment.
typedef enum PlusEventKind {
  PLUS_EVENT_KIND_ORIGIN = 0,
  PLUS_EVENT_KIND_ACTIVATE = 1,
  PLUS_EVENT_KIND_DEACTIVATE = 2,
  PLUS_EVENT_KIND_KNOT_CROSS = 3,
  PLUS_EVENT_KIND_TERMINATE_FIT = 4,
  PLUS_EVENT_KIND_TERMINATE_CAP = 5,
  PLUS_EVENT_KIND_TERMINATE_LIMIT = 6,
} PlusEventKind;

typedef enum PlusPenaltyKind {
  PLUS_PENALTY_KIND_L1 = 0,
  PLUS_PENALTY_KIND_MCP = 1,
  PLUS_PENALTY_KIND_SCAD = 2,
} PlusPenaltyKind;

// Result code of every fallible call.
typedef enum PlusStatus {
  PLUS_STATUS_OK = 0,
  PLUS_STATUS_NULL_POINTER = 1,
  PLUS_STATUS_INVALID_ARGUMENT = 2,
  PLUS_STATUS_DIMENSION_MISMATCH = 3,
  PLUS_STATUS_NUMERIC = 4,
  PLUS_STATUS_OUT_OF_RANGE = 5,
  PLUS_STATUS_PANIC = 6,
} PlusStatus;

// Opaque standardized design handle.
typedef struct PlusDesign PlusDesign;

// Opaque solution path handle.
typedef struct PlusPath PlusPath;

// Opaque penalty handle.
typedef struct PlusPenalty PlusPenalty;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *plus_last_error_message(void);

// Creates a penalty; `gamma` is ignored for `L1`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum PlusStatus plus_penalty_new(enum PlusPenaltyKind kind, double gamma, struct PlusPenalty **out);

// # Safety
// `pen` must come from [`plus_penalty_new`] and not be freed twice.
void plus_penalty_free(struct PlusPenalty *pen);

// `rho(t; lambda)` for `t >= 0`.
//
// # Safety
// `pen` must be a live handle and `out` writable.
enum PlusStatus plus_penalty_value(const struct PlusPenalty *pen,
                                   double t,
                                   double lambda,
                                   double *out);

// Derivative of `rho(t; lambda)` for `t > 0`.
//
// # Safety
// `pen` must be a live handle and `out` writable.
enum PlusStatus plus_penalty_deriv(const struct PlusPenalty *pen,
                                   double t,
                                   double lambda,
                                   double *out);

// Maximum concavity of the unit-level penalty.
//
// # Safety
// `pen` must be a live handle and `out` writable.
enum PlusStatus plus_penalty_max_concavity(const struct PlusPenalty *pen, double *out);

// Standardizes an `n x p` design given in row-major order.
//
// # Safety
// `data` must point to `n * p` readable doubles and `out` be writable.
enum PlusStatus plus_design_new(const double *data,
                                uintptr_t n,
                                uintptr_t p,
                                struct PlusDesign **out);

// # Safety
// `design` must come from [`plus_design_new`] and not be freed twice.
void plus_design_free(struct PlusDesign *design);

// Column scale factors `||x_j|| / sqrt(n)` used to standardize; writes `p` values.
//
// # Safety
// `design` must be a live handle and `scales` hold `p` writable doubles.
enum PlusStatus plus_design_col_scales(const struct PlusDesign *design, double *scales);

// Tracks the path for response `y` of length `n`. `max_steps = 0` uses the
// default cap; `lambda_min <= 0` tracks to the end of the path.
//
// # Safety
// `design` and `pen` must be live handles, `y` must hold `n` doubles, `out` writable.
enum PlusStatus plus_path_compute(const struct PlusDesign *design,
                                  const double *y,
                                  uintptr_t n,
                                  const struct PlusPenalty *pen,
                                  uintptr_t max_steps,
                                  double lambda_min,
                                  struct PlusPath **out);

// # Safety
// `path` must come from [`plus_path_compute`] and not be freed twice.
void plus_path_free(struct PlusPath *path);

// Number of breakpoints, including the origin and the terminal record.
//
// # Safety
// `path` must be a live handle and `out` writable.
enum PlusStatus plus_path_len(const struct PlusPath *path, uintptr_t *out);

// Reads breakpoint `k`: `tau = 1 / lambda`, the rescaled coefficients
// `b = tau * beta` (`p` values), the event kind, its coordinate (or -1) and,
// for knot crossings, the 1-based spline segment entered (otherwise 0).
//
// # Safety
// `path` must be a live handle; `b` must hold `p` writable doubles; the
// remaining outputs must be writable.
enum PlusStatus plus_path_breakpoint(const struct PlusPath *path,
                                     uintptr_t k,
                                     double *tau,
                                     double *b,
                                     enum PlusEventKind *event,
                                     int64_t *coordinate,
                                     uint32_t *segment);

// Standardized-scale coefficients at `lambda` (`p` values), choosing the
// sparsest crossing when the path meets the level more than once.
//
// # Safety
// `path` must be a live handle; `beta` must hold `p` writable doubles;
// `crossings` may be null.
enum PlusStatus plus_path_solve(const struct PlusPath *path,
                                double lambda,
                                double *beta,
                                uintptr_t *crossings);

// `sigma * sqrt(2 log(p) / n)`.
//
// # Safety
// `out` must be writable.
enum PlusStatus plus_universal_lambda(double sigma, uintptr_t p, uintptr_t n, double *out);

// `2 (p - d_o) Phi(-lambda sqrt(n))`.
//
// # Safety
// `out` must be writable.
enum PlusStatus plus_false_selection_bound(uintptr_t p,
                                           uintptr_t d_o,
                                           uintptr_t n,
                                           double lambda,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLUS_H */
