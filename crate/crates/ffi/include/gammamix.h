#ifndef GAMMAMIX_H
#define GAMMAMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum GmStatus {
  GM_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INPUT = 2,
  GM_STATUS_DOMAIN = 3,
  GM_STATUS_PARSE = 4,
  GM_STATUS_IO = 5,
  GM_STATUS_FIT = 6,
  GM_STATUS_TOO_FEW_SAMPLES = 7,
  GM_STATUS_SIZE = 8,
  GM_STATUS_ASSIGNMENT = 9,
  /*
   The output buffer is smaller than the result.
   */
  GM_STATUS_BUFFER_TOO_SMALL = 10,
  /*
   A Rust panic was caught at the boundary.
   */
  GM_STATUS_PANIC = 11,
} GmStatus;

/*
 A fitted or constructed mixture.
 */
typedef struct GmModel GmModel;

/*
 Options for [`gm_fit`]; start from [`gm_fit_options_default`].
 */
typedef struct GmFitOptions {
  size_t n_states;
  size_t max_iters;
  double rel_ll_tol;
  bool warm_start;
  /*
   Require samples in [-1, 1].
   */
  bool cosine_bounds;
  /*
   Use the profile shift update instead of the score root.
   */
  bool profile_shift;
} GmFitOptions;

/*
 Options for [`gm_simulate`]; start from [`gm_simulate_options_default`].
 */
typedef struct GmSimulateOptions {
  size_t depth;
  double ratio;
  size_t degree;
  size_t dim;
  uint64_t seed;
  /*
   Compare with the root instead of the first leaf.
   */
  bool root_query;
  bool drop_self;
} GmSimulateOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *gm_last_error(void);

/*
 Builds a mixture from `n` components given as parallel arrays.

 # Safety
 Each array must hold `n` doubles; `out` must be writable.
 */
enum GmStatus gm_model_new(size_t n,
                           const double *tau,
                           const double *alpha,
                           const double *c,
                           const double *lambda,
                           struct GmModel **out_model);

/*
 Releases a model. Null is ignored.

 # Safety
 `m` must come from this library and not be used afterwards.
 */
void gm_model_free(struct GmModel *m);

/*
 Reads a model file.

 # Safety
 `file` must be a nul-terminated string; `out_model` must be writable.
 */
enum GmStatus gm_model_load(const char *file, struct GmModel **out_model);

/*
 Writes a model file.

 # Safety
 `m` must be a live handle and `file` a nul-terminated string.
 */
enum GmStatus gm_model_save(const struct GmModel *m, const char *file);

/*
 # Safety
 `m` must be a live handle; `out_n` must be writable.
 */
enum GmStatus gm_model_n_states(const struct GmModel *m, size_t *out_n);

/*
 Parameters of state `i`, states in ascending order of their means.

 # Safety
 `m` must be a live handle; all out pointers must be writable.
 */
enum GmStatus gm_model_component(const struct GmModel *m,
                                 size_t i,
                                 double *tau,
                                 double *alpha,
                                 double *c,
                                 double *lambda);

struct GmFitOptions gm_fit_options_default(size_t n_states);

/*
 Fits a mixture to `n` samples. `out_log_likelihood` may be null.

 # Safety
 `xs` must hold `n` doubles; `opts` and `out_model` must be valid.
 */
enum GmStatus gm_fit(const double *xs,
                     size_t n,
                     const struct GmFitOptions *opts,
                     struct GmModel **out_model,
                     double *out_log_likelihood);

/*
 Log density; `-inf` below every shift.

 # Safety
 `m` must be a live handle; `out_value` must be writable.
 */
enum GmStatus gm_model_log_pdf(const struct GmModel *m, double x, double *out_value);

/*
 # Safety
 `m` must be a live handle; `out_value` must be writable.
 */
enum GmStatus gm_model_cdf(const struct GmModel *m, double x, double *out_value);

/*
 # Safety
 `m` must be a live handle; `out_value` must be writable.
 */
enum GmStatus gm_model_sf(const struct GmModel *m, double x, double *out_value);

/*
 Right-tail p-value of similarity `x` under null `m`.

 # Safety
 `m` must be a live handle; `out_value` must be writable.
 */
enum GmStatus gm_p_value(const struct GmModel *m, double x, double *out_value);

/*
 Draws `n` samples into `buf`.

 # Safety
 `m` must be a live handle and `buf` must hold `n` doubles.
 */
enum GmStatus gm_model_sample(const struct GmModel *m, size_t n, uint64_t seed, double *buf);

/*
 Fisher combination of `n` p-values. `out_clamped` may be null.

 # Safety
 `ps` must hold `n` doubles; `out_stat` and `out_p` must be writable.
 */
enum GmStatus gm_combine_p_values(const double *ps,
                                  size_t n,
                                  double *out_stat,
                                  double *out_p,
                                  bool *out_clamped);

struct GmSimulateOptions gm_simulate_options_default(size_t depth, double ratio, size_t degree);

/*
 Number of similarities [`gm_simulate`] will write.

 # Safety
 `opts` must be valid; `out_len` must be writable.
 */
enum GmStatus gm_simulate_len(const struct GmSimulateOptions *opts, size_t *out_len);

/*
 Simulates a hierarchy and writes similarities and common-ancestor levels.
 `levels` may be null. Fails with `BufferTooSmall` when `cap` is short.

 # Safety
 `sims` (and `levels`, if given) must hold `cap` elements.
 */
enum GmStatus gm_simulate(const struct GmSimulateOptions *opts,
                          double *sims,
                          uint32_t *levels,
                          size_t cap,
                          size_t *out_len);

/*
 # Safety
 `out_value` must be writable.
 */
enum GmStatus gm_log_gamma(double a, double *out_value);

/*
 # Safety
 `out_value` must be writable.
 */
enum GmStatus gm_digamma(double a, double *out_value);

/*
 # Safety
 `out_value` must be writable.
 */
enum GmStatus gm_trigamma(double a, double *out_value);

/*
 Regularized lower incomplete gamma `P(a, x)`.

 # Safety
 `out_value` must be writable.
 */
enum GmStatus gm_gamma_p(double a, double x, double *out_value);

/*
 `x` with `P(a, x) = p`.

 # Safety
 `out_value` must be writable.
 */
enum GmStatus gm_inv_gamma_p(double a, double p, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMMAMIX_H */
