#ifndef ELASTICA_H
#define ELASTICA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ElasticaStatus {
  ELASTICA_STATUS_OK = 0,
  ELASTICA_STATUS_NULL_POINTER = 1,
  ELASTICA_STATUS_INVALID_ARGUMENT = 2,
  ELASTICA_STATUS_LENGTH_MISMATCH = 3,
  ELASTICA_STATUS_NON_FINITE = 4,
  ELASTICA_STATUS_IO = 5,
  /**
   * The Rust side panicked; the handle involved should not be reused.
   */
  ELASTICA_STATUS_PANIC = 6,
} ElasticaStatus;

/**
 * A periodic polygonal curve.
 */
typedef struct ElasticaCurve ElasticaCurve;

/**
 * The discrete energy on a fixed grid and obstacle.
 */
typedef struct ElasticaEnergy ElasticaEnergy;

/**
 * Outcome of [`elastica_minimize`].
 */
typedef struct ElasticaResult ElasticaResult;

/**
 * Model parameters. `c` is the full bending modulus.
 */
typedef struct ElasticaParams {
  double c;
  double sigma;
  double gamma;
  double delta;
  double rho;
} ElasticaParams;

/**
 * Energy terms; `total = bending + tension - adhesion + penalty`.
 */
typedef struct ElasticaBreakdown {
  double bending;
  double tension;
  double adhesion;
  double penalty;
  double total;
} ElasticaBreakdown;

/**
 * Stopping rule for [`elastica_minimize`]. Zero fields take the defaults.
 */
typedef struct ElasticaOptions {
  double tolerance;
  size_t max_iterations;
} ElasticaOptions;

typedef struct ElasticaSummary {
  struct ElasticaBreakdown energy;
  size_t iterations;
  double final_criterion;
  bool converged;
} ElasticaSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t elastica_last_error_message(char *buf, size_t len);

/**
 * Static version string of the library.
 */
const char *elastica_version(void);

/**
 * Builds a curve from `n` nodal values over the uniform periodic grid.
 *
 * # Safety
 * `values` must point to `n` readable doubles; `out` must be writable.
 */
enum ElasticaStatus elastica_curve_new(const double *values, size_t n, struct ElasticaCurve **out);

/**
 * # Safety
 * `curve` must be null or a pointer from this library not yet freed.
 */
void elastica_curve_free(struct ElasticaCurve *curve);

/**
 * Number of nodes, or 0 for a null curve.
 *
 * # Safety
 * `curve` must be null or a live curve handle.
 */
size_t elastica_curve_len(const struct ElasticaCurve *curve);

/**
 * Copies the nodal values into `out`, which must hold exactly the curve length.
 *
 * # Safety
 * `curve` must be a live handle and `out` must point to `n` writable doubles.
 */
enum ElasticaStatus elastica_curve_values(const struct ElasticaCurve *curve, double *out, size_t n);

/**
 * Builds the energy for `n` nodes and the obstacle named by `obstacle`
 * (`sin24`, `peak`, `peak(eps=..)`, `flat(c=..)` or `csv:<path>`).
 *
 * # Safety
 * `obstacle` must be a NUL-terminated string, `params` readable and `out` writable.
 */
enum ElasticaStatus elastica_energy_new(const char *obstacle,
                                        size_t n,
                                        const struct ElasticaParams *params,
                                        struct ElasticaEnergy **out);

/**
 * # Safety
 * `energy` must be null or a pointer from this library not yet freed.
 */
void elastica_energy_free(struct ElasticaEnergy *energy);

/**
 * Obstacle values at the grid nodes.
 *
 * # Safety
 * `energy` must be a live handle and `out` must point to `n` writable doubles.
 */
enum ElasticaStatus elastica_energy_obstacle(const struct ElasticaEnergy *energy,
                                             double *out,
                                             size_t n);

/**
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum ElasticaStatus elastica_energy_breakdown(const struct ElasticaEnergy *energy,
                                              const struct ElasticaCurve *curve,
                                              struct ElasticaBreakdown *out);

/**
 * Gradient of the total energy with respect to the nodal values.
 *
 * # Safety
 * Both handles must be live and `out` must point to `n` writable doubles.
 */
enum ElasticaStatus elastica_energy_gradient(const struct ElasticaEnergy *energy,
                                             const struct ElasticaCurve *curve,
                                             double *out,
                                             size_t n);

/**
 * Minimizes from `initial`. A run that stops without meeting the tolerance
 * still returns `ELASTICA_STATUS_OK`; check `converged` in the summary.
 *
 * # Safety
 * Handles must be live, `options` null or readable, `out` writable.
 */
enum ElasticaStatus elastica_minimize(const struct ElasticaEnergy *energy,
                                      const struct ElasticaCurve *initial,
                                      const struct ElasticaOptions *options,
                                      struct ElasticaResult **out);

/**
 * # Safety
 * `result` must be null or a pointer from this library not yet freed.
 */
void elastica_result_free(struct ElasticaResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum ElasticaStatus elastica_result_summary(const struct ElasticaResult *result,
                                            struct ElasticaSummary *out);

/**
 * A new curve handle holding the minimizer; free it separately.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum ElasticaStatus elastica_result_curve(const struct ElasticaResult *result,
                                          struct ElasticaCurve **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTICA_H */
