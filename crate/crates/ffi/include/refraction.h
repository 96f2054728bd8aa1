#ifndef REFRACTION_H
#define REFRACTION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  RF_STATUS_INVALID_MODEL = 3,
  RF_STATUS_NUMERICAL = 4,
  RF_STATUS_OUT_OF_DOMAIN = 5,
  RF_STATUS_PANIC = 6,
} RfStatus;

typedef enum RfRegime {
  RF_REGIME_BARRIER_ZERO = 0,
  RF_REGIME_BARRIER_POSITIVE = 1,
} RfRegime;

typedef enum RfSpecial {
  /**
   * `M(a, b; z)`
   */
  RF_SPECIAL_KUMMER_M = 0,
  /**
   * `U(a, b; z)`
   */
  RF_SPECIAL_TRICOMI_U = 1,
  /**
   * `D_{-a}(z)`; `b` is ignored.
   */
  RF_SPECIAL_PARABOLIC_D = 2,
} RfSpecial;

/**
 * A validated run configuration.
 */
typedef struct RfConfig RfConfig;

/**
 * A solved problem.
 */
typedef struct RfSolution RfSolution;

typedef struct RfBarrier {
  enum RfRegime regime;
  double b_star;
  double b_hat;
  /**
   * 1 if every diagnostic met its threshold.
   */
  int32_t diagnostics_pass;
} RfBarrier;

typedef struct RfEstimate {
  double mean;
  double std_error;
  double absorbed_fraction;
  double mean_absorption_time;
  uint64_t n_paths;
} RfEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *rf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rf_version(void);

/**
 * Parse a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_config_from_toml(const char *toml, struct RfConfig **out);

/**
 * A configuration with drift `mu0 + mu1 x`, constant diffusion `sigma`,
 * bound `f0 + f1 x` and discount rate `q`; everything else at defaults.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RfStatus rf_config_affine(double mu0,
                               double mu1,
                               double sigma,
                               double f0,
                               double f1,
                               double q,
                               struct RfConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from `rf_config_*` not yet freed.
 */
void rf_config_free(struct RfConfig *cfg);

/**
 * Solve for `b*` and the value function.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid pointer.
 */
enum RfStatus rf_solve(const struct RfConfig *cfg, struct RfSolution **out);

/**
 * # Safety
 * `sol` must be null or a handle from `rf_solve` not yet freed.
 */
void rf_solution_free(struct RfSolution *sol);

/**
 * Regime, `b*`, `b̂` and whether the diagnostics passed their default
 * thresholds.
 *
 * # Safety
 * `sol` must be a live solution handle and `out` a valid pointer.
 */
enum RfStatus rf_solution_barrier(const struct RfSolution *sol, struct RfBarrier *out);

/**
 * `V(x), V'(x), V''(x)` into `out[0..3]`, for `x` in `[0, x_hi]`.
 *
 * # Safety
 * `sol` must be a live solution handle and `out` must point to three doubles.
 */
enum RfStatus rf_solution_value(const struct RfSolution *sol, double x, double *out);

/**
 * `J_b(x)`, the value of the refraction strategy at barrier `b`.
 *
 * # Safety
 * `sol` must be a live solution handle and `out` a valid pointer.
 */
enum RfStatus rf_solution_performance(const struct RfSolution *sol,
                                      double b,
                                      double x,
                                      double *out);

/**
 * Monte Carlo estimate of `J_b(x0)`, Brownian-bridge absorption at 0.
 *
 * # Safety
 * `sol` must be a live solution handle and `out` a valid pointer.
 */
enum RfStatus rf_simulate(const struct RfSolution *sol,
                          double b,
                          double x0,
                          uint64_t n_paths,
                          double dt,
                          uint64_t seed,
                          struct RfEstimate *out);

/**
 * Evaluate the special function `which` (an [`RfSpecial`] value);
 * `abs_error` may be null.
 *
 * # Safety
 * `value` must be a valid pointer; `abs_error` must be null or valid.
 */
enum RfStatus rf_special(int32_t which,
                         double a,
                         double b,
                         double z,
                         double *value,
                         double *abs_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFRACTION_H */
