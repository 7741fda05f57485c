#ifndef LEVYBOUND_H
#define LEVYBOUND_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LbStatus {
  LB_STATUS_OK = 0,
  LB_STATUS_NULL_POINTER = 1,
  LB_STATUS_INVALID_ARGUMENT = 2,
  LB_STATUS_PARSE = 3,
  /**
   * Outside the hypotheses the bounds rely on.
   */
  LB_STATUS_REFUSED = 4,
  /**
   * Over a resource or enumeration cap.
   */
  LB_STATUS_CAP_EXCEEDED = 5,
  /**
   * Numerical failure: non-finite value, no convergence, unstable filter.
   */
  LB_STATUS_COMPUTATION = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  LB_STATUS_INTERNAL = 7,
} LbStatus;

/**
 * Scenario text encoding accepted by [`lb_series_from_scenario`].
 */
enum LbScenarioFormat
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  LB_SCENARIO_FORMAT_JSON = 0,
  LB_SCENARIO_FORMAT_TOML = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum LbScenarioFormat LbScenarioFormat;
#else
typedef uint32_t LbScenarioFormat;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque truncated moment series.
 */
typedef struct LbSeries LbSeries;

/**
 * Tail bound at one order `k`.
 */
typedef struct LbTailBound {
  uintptr_t k;
  double epsilon;
  /**
   * May underflow to zero; `log10_probability` stays exact.
   */
  double probability;
  double log10_probability;
  double log10_moment;
  bool levy;
} LbTailBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *lb_version(void);

/**
 * Message of the last failed call on this thread, or null. The caller owns
 * the copy and frees it with [`lb_string_free`].
 */
char *lb_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void lb_string_free(char *s);

/**
 * Series of `n` iterations with `m` uniform errors of half-width `u` each,
 * truncated at `order`. `u` accepts `2^-24`, `1/3` or a decimal.
 *
 * # Safety
 * `u` must be a valid C string and `out` writable.
 */
enum LbStatus lb_series_accumulation(uint64_t n,
                                     uint64_t m,
                                     const char *u,
                                     uintptr_t order,
                                     struct LbSeries **out);

/**
 * Series of a scenario given as JSON or TOML text; `format` is an [`LbScenarioFormat`].
 *
 * # Safety
 * `text` must be a valid C string and `out` writable.
 */
enum LbStatus lb_series_from_scenario(const char *text,
                                      uint32_t format,
                                      uintptr_t order,
                                      struct LbSeries **out);

/**
 * Series of the sum of `n` independent copies.
 *
 * # Safety
 * `a` must be a live series and `out` writable.
 */
enum LbStatus lb_series_power(const struct LbSeries *a, uint64_t n, struct LbSeries **out);

/**
 * Series of the sum of two independent families. Orders must match.
 *
 * # Safety
 * `a` and `b` must be live series and `out` writable.
 */
enum LbStatus lb_series_product(const struct LbSeries *a,
                                const struct LbSeries *b,
                                struct LbSeries **out);

/**
 * # Safety
 * `s` must be null or a series from this library, freed once.
 */
void lb_series_free(struct LbSeries *s);

/**
 * Truncation order, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live series.
 */
uintptr_t lb_series_order(const struct LbSeries *s);

/**
 * Exact bound on `E(S^2k)` as a reduced fraction `"p/q"`.
 *
 * # Safety
 * `s` must be a live series and `out` writable; free the string with [`lb_string_free`].
 */
enum LbStatus lb_series_moment_bound(const struct LbSeries *s, uintptr_t k, char **out);

/**
 * `log10` of the bound on `E(S^2k)`; finite even when the value overflows a double.
 *
 * # Safety
 * `s` must be a live series and `out` writable.
 */
enum LbStatus lb_series_moment_log10(const struct LbSeries *s, uintptr_t k, double *out);

/**
 * Threshold exceeded with probability at most `probability` at fixed `k`.
 * With `levy` the bound covers the running maximum.
 *
 * # Safety
 * `s` must be a live series and `out` writable.
 */
enum LbStatus lb_epsilon_for_probability(const struct LbSeries *s,
                                         uintptr_t k,
                                         double probability,
                                         bool levy,
                                         double *out);

/**
 * Smallest threshold over `k` in `1..=k_max`.
 *
 * # Safety
 * `s` must be a live series and `out` writable.
 */
enum LbStatus lb_optimize_k(const struct LbSeries *s,
                            double probability,
                            bool levy,
                            uintptr_t k_max,
                            struct LbTailBound *out);

/**
 * Probability bound for exceeding `epsilon` at fixed `k`.
 *
 * # Safety
 * `s` must be a live series and `out` writable.
 */
enum LbStatus lb_tail_bound(const struct LbSeries *s,
                            uintptr_t k,
                            double epsilon,
                            bool levy,
                            struct LbTailBound *out);

/**
 * Closed-form bound on the summed impulse response of
 * `y_i = d_i - b1 y_{i-1} - b2 y_{i-2}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LbStatus lb_filter_bibo_bound(double b1, double b2, double *out);

/**
 * `sum |y_i|` of the impulse response to within `tol`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LbStatus lb_filter_coefficient_sum(double b1, double b2, double tol, double *out);

/**
 * Two-sided Clopper-Pearson interval.
 *
 * # Safety
 * `lo` and `hi` must be writable.
 */
enum LbStatus lb_clopper_pearson(uint64_t successes,
                                 uint64_t trials,
                                 double level,
                                 double *lo,
                                 double *hi);

/**
 * Monte Carlo run from a JSON simulation config; writes the JSON report.
 *
 * # Safety
 * `config_json` must be a valid C string and `out` writable; free the
 * string with [`lb_string_free`].
 */
enum LbStatus lb_simulate_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVYBOUND_H */
