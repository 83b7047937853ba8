#ifndef DAM_CONTROL_H
#define DAM_CONTROL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DamStatus {
  DAM_STATUS_OK = 0,
  DAM_STATUS_NULL_POINTER = 1,
  DAM_STATUS_INVALID_STRING = 2,
  DAM_STATUS_BUFFER_TOO_SMALL = 3,
  DAM_STATUS_DOMAIN = 10,
  DAM_STATUS_REGIME = 11,
  DAM_STATUS_CONVERGENCE = 12,
  DAM_STATUS_EXISTENCE = 13,
  DAM_STATUS_OVERFLOW = 14,
  DAM_STATUS_INDEX = 15,
  DAM_STATUS_CONFIG = 16,
  DAM_STATUS_AMBIGUITY = 17,
  DAM_STATUS_BRACKET = 18,
  DAM_STATUS_IO = 19,
  DAM_STATUS_PANIC = 99,
} DamStatus;

typedef enum DamRegimeKind {
  DAM_REGIME_KIND_BALANCED = 0,
  DAM_REGIME_KIND_UPPER = 1,
  DAM_REGIME_KIND_LOWER = 2,
} DamRegimeKind;

/**
 * Finite-L model: arrival rate, two service laws, levels and penalties.
 */
typedef struct DamModel DamModel;

/**
 * Parameters of the heavy-traffic functionals.
 */
typedef struct DamRegimeParams DamRegimeParams;

/**
 * Optimal control as plain data. `c` is zero for the balanced regime.
 */
typedef struct DamSolution {
  enum DamRegimeKind regime;
  double c;
  double objective;
  double balanced_value;
} DamSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dam_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dam_version(void);

/**
 * Builds a model. Service laws use the textual form `exp:2`, `erlang:3,1.5`,
 * `hyperexp:0.3|0.7;1|4` or `det:0.5`.
 *
 * # Safety
 * `b1` and `b2` must be NUL-terminated strings; `out` must be writable.
 */
enum DamStatus dam_model_new(double lambda,
                             const char *b1,
                             const char *b2,
                             size_t levels,
                             double j1,
                             double j2,
                             struct DamModel **out);

/**
 * # Safety
 * `model` must come from [`dam_model_new`] or be null.
 */
void dam_model_free(struct DamModel *model);

/**
 * # Safety
 * `model` must be a live handle; `rho1` and `rho2` writable.
 */
enum DamStatus dam_model_intensities(const struct DamModel *model, double *rho1, double *rho2);

/**
 * Stationary quantities. `q` receives `L` values and `q_len` must be at
 * least `L`; pass a null `q` to skip it.
 *
 * # Safety
 * Scalar out-pointers must be writable; `q`, if not null, must hold `q_len` doubles.
 */
enum DamStatus dam_model_stationary(const struct DamModel *model,
                                    double *p1,
                                    double *p2,
                                    double *defect,
                                    double *q,
                                    size_t q_len);

/**
 * Exact long-run cost rate under the given cost model (`constant:1`,
 * `linear:2,1`, `table:2|1.5|1,stretch`).
 *
 * # Safety
 * `model` must be live, `costs` NUL-terminated and `out` writable.
 */
enum DamStatus dam_model_objective(const struct DamModel *model, const char *costs, double *out);

/**
 * # Safety
 * `costs` must be NUL-terminated; `out` writable.
 */
enum DamStatus dam_regime_new(double j1,
                              double j2,
                              double rho2,
                              double rho12,
                              const char *costs,
                              struct DamRegimeParams **out);

/**
 * # Safety
 * `params` must come from [`dam_regime_new`] or be null.
 */
void dam_regime_free(struct DamRegimeParams *params);

/**
 * # Safety
 * `params` must be live and `out` writable.
 */
enum DamStatus dam_regime_balanced_limit(const struct DamRegimeParams *params, double *out);

/**
 * # Safety
 * `params` must be live and `out` writable.
 */
enum DamStatus dam_regime_j_upper(const struct DamRegimeParams *params, double c, double *out);

/**
 * # Safety
 * `params` must be live and `out` writable.
 */
enum DamStatus dam_regime_j_lower(const struct DamRegimeParams *params, double c, double *out);

/**
 * Optimal regime. Non-positive `c_max` or `tol` select the library defaults.
 *
 * # Safety
 * `params` must be live and `out` writable.
 */
enum DamStatus dam_solve(const struct DamRegimeParams *params,
                         double c_max,
                         double tol,
                         struct DamSolution *out);

/**
 * Smallest `j2` (other parameters fixed) for which the upper regime is no
 * longer optimal.
 *
 * # Safety
 * `params` must be live and `out` writable.
 */
enum DamStatus dam_threshold_j2(const struct DamRegimeParams *params,
                                double c_max,
                                double tol,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAM_CONTROL_H */
