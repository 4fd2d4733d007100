#ifndef OBLIQUE_H
#define OBLIQUE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum OblStatus {
  OBL_STATUS_OK = 0,
  OBL_STATUS_NULL_POINTER = 1,
  OBL_STATUS_INVALID_UTF8 = 2,
  OBL_STATUS_CONFIG_ERROR = 3,
  OBL_STATUS_INVALID_ARGUMENT = 4,
  OBL_STATUS_NUMERICAL_FAILURE = 5,
  OBL_STATUS_IO_ERROR = 6,
  OBL_STATUS_BUFFER_TOO_SMALL = 7,
  OBL_STATUS_PANIC = 8,
} OblStatus;

/**
 * A graph domain together with its regularized distance.
 */
typedef struct OblDomain OblDomain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *obl_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated).
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
enum OblStatus obl_last_error(char *buf, size_t len);

/**
 * Builds a domain from its JSON description, e.g.
 * `{"type": "sawtooth", "slope": 0.05, "delta": 0.5, "eps0": 0.05, "R0": 1}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OblStatus obl_domain_from_json(const char *json, struct OblDomain **out);

/**
 * Releases a domain. Null is ignored.
 *
 * # Safety
 * `domain` must come from [`obl_domain_from_json`] and not be used afterwards.
 */
void obl_domain_free(struct OblDomain *domain);

/**
 * Dimension `d` of the domain, or 0 for a null handle.
 *
 * # Safety
 * `domain` must be null or a live handle.
 */
size_t obl_domain_dim(const struct OblDomain *domain);

/**
 * Regularized distance `ρ0(y)` and, when `grad` is non-null, `Dρ0(y)` (`dim` entries).
 *
 * # Safety
 * `y` must hold `dim` values, `rho` must be valid and `grad` null or `dim` writable values.
 */
enum OblStatus obl_regdist(const struct OblDomain *domain,
                           const double *y,
                           size_t dim,
                           double *rho,
                           double *grad);

/**
 * Admissible `β` window `(lower, upper]` of the cusp example; `nonempty` is 0 when empty.
 *
 * # Safety
 * All output pointers must be valid.
 */
enum OblStatus obl_cusp_window(double p,
                               double eps,
                               double *lower,
                               double *upper,
                               int32_t *nonempty);

/**
 * Wedge certificate at one exponent: `divergent` is 1 when `‖D²u‖_p` diverges at the tip,
 * `slope` the fitted shell slope, `all_pass` 1 when every verdict holds.
 *
 * # Safety
 * All output pointers must be valid.
 */
enum OblStatus obl_certify_wedge(double theta0,
                                 double p,
                                 int32_t *divergent,
                                 double *slope,
                                 int32_t *all_pass);

/**
 * Runs an experiment config (JSON text) and writes its artifacts under `out_dir`.
 * `exit_code` receives the CLI exit code: 0 ok, 1 invariant failure, 2 config error.
 *
 * # Safety
 * `config_json` and `out_dir` must be NUL-terminated strings, `exit_code` a valid pointer.
 */
enum OblStatus obl_run_experiment(const char *config_json,
                                  const char *out_dir,
                                  size_t jobs,
                                  int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBLIQUE_H */
