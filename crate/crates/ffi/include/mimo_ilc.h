#ifndef MIMO_ILC_H
#define MIMO_ILC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MiStatus {
  MI_STATUS_OK = 0,
  MI_STATUS_NULL_POINTER = 1,
  MI_STATUS_INVALID_INPUT = 2,
  MI_STATUS_NUMERICAL = 3,
  MI_STATUS_VERDICT_FALSE = 4,
  MI_STATUS_INFEASIBLE = 5,
  MI_STATUS_BUFFER_TOO_SMALL = 6,
  MI_STATUS_PANIC = 7,
} MiStatus;

/**
 * ILC design: learning filter, robustness filters and convergence summary.
 */
typedef struct MiDesign MiDesign;

/**
 * Sampled frequency response.
 */
typedef struct MiFrf MiFrf;

/**
 * Transfer-matrix model.
 */
typedef struct MiModel MiModel;

/**
 * Convergence summary on the tuning grid.
 */
typedef struct MiVerdict {
  bool convergent;
  bool monotone;
  bool joint_convergent;
  bool joint_monotone;
  bool target_met;
  double gamma;
  double rho_max;
  double worst_omega;
  double fit_error;
} MiVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mi_version(void);

/**
 * Copies the calling thread's last error message into `buf`.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null; `needed` must be valid or null.
 */
enum MiStatus mi_last_error(char *buf, size_t cap, size_t *needed);

/**
 * Parses a transfer-matrix JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum MiStatus mi_model_from_json(const char *json, struct MiModel **out);

/**
 * # Safety
 * `model` must come from `mi_model_from_json` and not be used afterwards; null is ignored.
 */
void mi_model_free(struct MiModel *model);

/**
 * # Safety
 * `model` must be a live handle; `ny`, `nu`, `ts` must be valid or null.
 */
enum MiStatus mi_model_dims(const struct MiModel *model, size_t *ny, size_t *nu, double *ts);

/**
 * Samples `model` at `n` strictly increasing frequencies in rad/sample within [0, π].
 *
 * # Safety
 * `omega` must hold `n` values; `out` must be valid for writes.
 */
enum MiStatus mi_frf_evaluate(const struct MiModel *model,
                              const double *omega,
                              size_t n,
                              struct MiFrf **out);

/**
 * # Safety
 * `frf` must be a live handle or null.
 */
size_t mi_frf_len(const struct MiFrf *frf);

/**
 * Entry (i, j) at frequency index k.
 *
 * # Safety
 * `frf` must be a live handle; `re`, `im` must be valid for writes.
 */
enum MiStatus mi_frf_get(const struct MiFrf *frf,
                         size_t k,
                         size_t i,
                         size_t j,
                         double *re,
                         double *im);

/**
 * # Safety
 * `frf` must come from `mi_frf_evaluate` and not be used afterwards; null is ignored.
 */
void mi_frf_free(struct MiFrf *frf);

/**
 * Spectral radius, structured-singular-value upper bound (diagonal structure) and σ̄ of a
 * complex n×n matrix given as row-major real and imaginary parts.
 *
 * # Safety
 * `re` and `im` must hold n·n values; outputs must be valid or null.
 */
enum MiStatus mi_bounds(const double *re,
                        const double *im,
                        size_t n,
                        double *rho,
                        double *mu,
                        double *sigma);

/**
 * Designs L and Q for `mode` ("naive", "alg1", "alg2", "alg3") against `target`
 * ("convergent", "monotone"). `j_meas` supplies the measured J used for tuning; the learning
 * filter inverts `model`. Zero `preview` or negative `regularization` select the defaults.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated; `out` valid for writes.
 */
enum MiStatus mi_design_new(const struct MiModel *model,
                            const struct MiFrf *j_meas,
                            const char *mode,
                            const char *target,
                            size_t preview,
                            double regularization,
                            struct MiDesign **out);

/**
 * # Safety
 * `design` must come from `mi_design_new` and not be used afterwards; null is ignored.
 */
void mi_design_free(struct MiDesign *design);

/**
 * Number of loops (robustness filters) of the design.
 *
 * # Safety
 * `design` must be a live handle or null.
 */
size_t mi_design_loops(const struct MiDesign *design);

/**
 * Copies the per-loop cut-offs in Hz into `out` (capacity `cap`).
 *
 * # Safety
 * `design` must be live; `out` valid for `cap` writes.
 */
enum MiStatus mi_design_cutoffs(const struct MiDesign *design, double *out, size_t cap);

/**
 * # Safety
 * `design` must be live; `out` valid for writes.
 */
enum MiStatus mi_design_verdict(const struct MiDesign *design, struct MiVerdict *out);

/**
 * Serializes the design to JSON (the format read by the command-line `analyze` and `simulate`).
 *
 * # Safety
 * `design` must be live; `buf` valid for `cap` bytes or null; `needed` valid or null.
 */
enum MiStatus mi_design_to_json(const struct MiDesign *design,
                                char *buf,
                                size_t cap,
                                size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_ILC_H */
