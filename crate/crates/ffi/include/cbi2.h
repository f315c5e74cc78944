/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CBI2_H
#define CBI2_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Status codes returned by every fallible call.
 */
typedef enum Cbi2Status {
  CBI2_STATUS_OK = 0,
  CBI2_STATUS_NULL_POINTER = 1,
  CBI2_STATUS_INVALID_PARAMETER = 2,
  CBI2_STATUS_SINGULAR = 3,
  CBI2_STATUS_NON_ADMISSIBLE = 4,
  CBI2_STATUS_ILL_CONDITIONED = 5,
  CBI2_STATUS_NUMERIC = 6,
  CBI2_STATUS_PARSE = 7,
  CBI2_STATUS_IO = 8,
  CBI2_STATUS_CONFIG = 9,
  CBI2_STATUS_UNAVAILABLE = 10,
  CBI2_STATUS_PANIC = 11,
} Cbi2Status;

/*
 Path generator for [`cbi2_simulate`].
 */
typedef enum Cbi2Sampler {
  CBI2_SAMPLER_EULER = 0,
  CBI2_SAMPLER_EXACT_DIAGONAL = 1,
} Cbi2Sampler;

/*
 Observation weight for [`cbi2_estimate`].
 */
typedef enum Cbi2Weight {
  CBI2_WEIGHT_CONSTANT = 0,
  CBI2_WEIGHT_INVERSE_NORM = 1,
} Cbi2Weight;

typedef struct Cbi2Estimate Cbi2Estimate;

typedef struct Cbi2Model Cbi2Model;

typedef struct Cbi2Series Cbi2Series;

/*
 Simulation settings; fill with [`cbi2_sim_options_default`] first.
 */
typedef struct Cbi2SimOptions {
  size_t n_obs;
  double delta;
  double euler_dt;
  double burn_in;
  double x0[2];
  uint64_t seed;
  enum Cbi2Sampler sampler;
} Cbi2SimOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread (empty after a success).
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *cbi2_last_error(void);

/*
 Validated model from `theta = (a1, a2, b11, b12, b21, b22, sigma1, sigma2)`.

 # Safety
 `theta` must point to 8 doubles; `out` must be a valid pointer.
 */
enum Cbi2Status cbi2_model_new(const double *theta, struct Cbi2Model **out);

/*
 # Safety
 `model` must come from [`cbi2_model_new`] and not be used afterwards.
 */
void cbi2_model_free(struct Cbi2Model *model);

/*
 `kappa = b12 b21 / (b11 b22)`; the model is ergodic when it is below 1.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_model_kappa(const struct Cbi2Model *model, double *out);

/*
 `E[X_t | X_0 = x]` into `out[2]`.

 # Safety
 Pointers must be valid; `x` and `out` hold 2 doubles.
 */
enum Cbi2Status cbi2_model_conditional_mean(const struct Cbi2Model *model,
                                            const double *x,
                                            double t,
                                            double *out);

/*
 `Cov[X_delta | X_0 = x]` into `out[4]`, row-major.

 # Safety
 Pointers must be valid; `x` holds 2 doubles, `out` 4.
 */
enum Cbi2Status cbi2_model_conditional_variance(const struct Cbi2Model *model,
                                                const double *x,
                                                double delta,
                                                double *out);

/*
 `E[exp(-<lambda, X_t>) | X_0 = x]`.

 # Safety
 Pointers must be valid; `x` and `lambda` hold 2 doubles.
 */
enum Cbi2Status cbi2_model_transition_laplace(const struct Cbi2Model *model,
                                              const double *x,
                                              const double *lambda,
                                              double t,
                                              double *out);

/*
 Laplace transform of the stationary law (ergodic models only).

 # Safety
 Pointers must be valid; `lambda` holds 2 doubles.
 */
enum Cbi2Status cbi2_model_stationary_laplace(const struct Cbi2Model *model,
                                              const double *lambda,
                                              double *out);

/*
 Defaults for `model`: `delta = 1`, `euler_dt = 1e-3`, burn-in
 `50 / xi_min`, `x0` at the long-run mean, exact sampler when the model is
 diagonal.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_sim_options_default(const struct Cbi2Model *model,
                                         size_t n_obs,
                                         uint64_t seed,
                                         struct Cbi2SimOptions *out);

/*
 Simulates `n_obs + 1` observations.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_simulate(const struct Cbi2Model *model,
                              const struct Cbi2SimOptions *options,
                              struct Cbi2Series **out);

/*
 Series from `n_points` interleaved `(x1, x2)` pairs spaced `delta` apart.

 # Safety
 `xy` must hold `2 * n_points` doubles; `out` must be valid.
 */
enum Cbi2Status cbi2_series_from_array(double delta,
                                       const double *xy,
                                       size_t n_points,
                                       struct Cbi2Series **out);

/*
 Reads a `t,x1,x2` CSV.

 # Safety
 `path` must be a NUL-terminated string; `out` must be valid.
 */
enum Cbi2Status cbi2_series_read_csv(const char *path, struct Cbi2Series **out);

/*
 # Safety
 `series` must be valid; `path` NUL-terminated.
 */
enum Cbi2Status cbi2_series_write_csv(const struct Cbi2Series *series, const char *path);

/*
 Number of observations (`n + 1`); 0 for a null handle.

 # Safety
 `series` must be valid or null.
 */
size_t cbi2_series_len(const struct Cbi2Series *series);

/*
 Observation spacing; NaN for a null handle.

 # Safety
 `series` must be valid or null.
 */
double cbi2_series_delta(const struct Cbi2Series *series);

/*
 Copies observations into `out` as interleaved pairs; `capacity` is the
 number of doubles available and must be at least `2 * cbi2_series_len`.

 # Safety
 `out` must hold `capacity` doubles.
 */
enum Cbi2Status cbi2_series_copy(const struct Cbi2Series *series, double *out, size_t capacity);

/*
 # Safety
 `series` must come from this library and not be used afterwards.
 */
void cbi2_series_free(struct Cbi2Series *series);

/*
 Fits drift, diffusion and (if requested) the sandwich covariance. A
 non-admissible drift is not an error here: check
 [`cbi2_estimate_admissible`].

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_estimate(const struct Cbi2Series *series,
                              enum Cbi2Weight weight,
                              bool with_covariance,
                              struct Cbi2Estimate **out);

/*
 # Safety
 `est` must be valid or null.
 */
bool cbi2_estimate_admissible(const struct Cbi2Estimate *est);

/*
 `rho[2]` and `gamma[4]` (row-major) of the one-step regression.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_estimate_regression(const struct Cbi2Estimate *est,
                                         double *rho,
                                         double *gamma);

/*
 `theta_hat[8]` in `(a1, a2, b11, b12, b21, b22, sigma1, sigma2)` order.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_estimate_theta(const struct Cbi2Estimate *est, double *out);

/*
 Unclamped `(sigma1^2, sigma2^2)`.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_estimate_sigma_sq_raw(const struct Cbi2Estimate *est, double *out);

/*
 8x8 covariance of `theta_hat`, row-major, into `out[64]`.

 # Safety
 Pointers must be valid.
 */
enum Cbi2Status cbi2_estimate_covariance(const struct Cbi2Estimate *est, double *out);

/*
 Writes the `name = value` report.

 # Safety
 `est` must be valid; `path` NUL-terminated.
 */
enum Cbi2Status cbi2_estimate_write_report(const struct Cbi2Estimate *est, const char *path);

/*
 # Safety
 `est` must come from [`cbi2_estimate`] and not be used afterwards.
 */
void cbi2_estimate_free(struct Cbi2Estimate *est);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBI2_H */
