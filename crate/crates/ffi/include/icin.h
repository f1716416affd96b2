/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef ICIN_H
#define ICIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IcinStatus {
  ICIN_STATUS_OK = 0,
  ICIN_STATUS_OTHER = 1,
  ICIN_STATUS_INPUT = 2,
  ICIN_STATUS_NUMERIC = 3,
  ICIN_STATUS_INFEASIBLE = 4,
  ICIN_STATUS_NULL_POINTER = 5,
  ICIN_STATUS_PANIC = 6,
} IcinStatus;

/*
 Fitted bivariate kernel-density model.
 */
typedef struct IcinBivariate IcinBivariate;

/*
 Full-data distribution.
 */
typedef struct IcinFullData IcinFullData;

/*
 Observed-data distribution.
 */
typedef struct IcinObserved IcinObserved;

/*
 Functionals of one pattern's density in the bivariate model.
 */
typedef struct IcinPatternFunctionals {
  double prob_x1_greater;
  double mean_x1;
  double mean_x2;
  double corr;
} IcinPatternFunctionals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Read an observed table (kind `observed` or `counts`, counts normalized)
 from JSON.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum IcinStatus icin_observed_from_json(const char *json, struct IcinObserved **out);

/*
 # Safety
 `obs` must come from [`icin_observed_from_json`] and not be used again.
 */
void icin_observed_free(struct IcinObserved *obs);

/*
 Number of items.

 # Safety
 `obs` must be a live handle and `out` writable.
 */
enum IcinStatus icin_observed_item_count(const struct IcinObserved *obs, size_t *out);

/*
 Serialize to the JSON table format; free the result with
 [`icin_string_free`].

 # Safety
 `obs` must be a live handle and `out` writable.
 */
enum IcinStatus icin_observed_to_json(const struct IcinObserved *obs, char **out);

/*
 Build the full-data distribution under itemwise conditional independence.

 # Safety
 `obs` must be a live handle and `out` writable.
 */
enum IcinStatus icin_full_data_build(const struct IcinObserved *obs, struct IcinFullData **out);

/*
 Build the full-data distribution shifted by the additive sensitivity
 function given as JSON.

 # Safety
 `obs` must be a live handle, `xi_json` NUL-terminated and `out` writable.
 */
enum IcinStatus icin_full_data_build_xi(const struct IcinObserved *obs,
                                        const char *xi_json,
                                        struct IcinFullData **out);

/*
 # Safety
 `g` must come from a `icin_full_data_build*` call and not be used again.
 */
void icin_full_data_free(struct IcinFullData *g);

/*
 `g(x, m)` for a full cell of 1-based levels and a pattern such as `"01"`.
 Patterns outside the model have mass 0.

 # Safety
 `g` must be a live handle, `cell` must hold `len` values, `pattern` must
 be NUL-terminated and `out` writable.
 */
enum IcinStatus icin_full_data_mass(const struct IcinFullData *g,
                                    const int32_t *cell,
                                    size_t len,
                                    const char *pattern,
                                    double *out);

/*
 Logit of `pr(M_item = 1 | x, M_-item = rest)`; `item` is 1-based and
 `rest` is a full pattern whose entry for `item` is ignored.

 # Safety
 `g` must be a live handle, `cell` must hold `len` values, `rest` must be
 NUL-terminated and `out` writable.
 */
enum IcinStatus icin_full_data_missingness_logit(const struct IcinFullData *g,
                                                 size_t item,
                                                 const char *rest,
                                                 const int32_t *cell,
                                                 size_t len,
                                                 double *out);

/*
 Probability under the full-data item marginal of the event given by one
 constraint per item: a 1-based level, or 0 for any level.

 # Safety
 `g` must be a live handle, `constraints` must hold `len` values and `out`
 must be writable.
 */
enum IcinStatus icin_full_data_event_probability(const struct IcinFullData *g,
                                                 const int32_t *constraints,
                                                 size_t len,
                                                 double *out);

/*
 Full-data masses as CSV with columns `x1..xp, m, g`; free the result with
 [`icin_string_free`].

 # Safety
 `g` must be a live handle and `out` writable.
 */
enum IcinStatus icin_full_data_to_csv(const struct IcinFullData *g, char **out);

/*
 # Safety
 `s` must be a string returned by this library and not be used again.
 */
void icin_string_free(char *s);

/*
 Posterior draws of an event probability from a counts table (JSON).
 `alpha <= 0` selects the default concentration `1 / (number of observed
 cells)`. Writes `n_draws` values to `out`.

 # Safety
 `counts_json` must be NUL-terminated, `constraints` must hold `len`
 values and `out` must have room for `n_draws` values.
 */
enum IcinStatus icin_posterior_event_draws(const char *counts_json,
                                           double alpha,
                                           size_t n_draws,
                                           uint64_t seed,
                                           const int32_t *constraints,
                                           size_t len,
                                           double *out);

/*
 Convex-hull check of `X_k ⊥ M_j | X_-k, M_-j` (1-based items). Sets
 `refuted` to 1 when some stratum is infeasible and reports the largest
 violation.

 # Safety
 `obs` must be a live handle; `refuted` and `worst_violation` writable.
 */
enum IcinStatus icin_convex_feasibility(const struct IcinObserved *obs,
                                        size_t j,
                                        size_t k,
                                        double tol,
                                        int32_t *refuted,
                                        double *worst_violation);

/*
 Fit the bivariate model to `n` records; NaN marks a missing value and a
 null `weights` gives every record weight 1.

 # Safety
 `x1` and `x2` must hold `n` values, `weights` must be null or hold `n`
 values, and `out` must be writable.
 */
enum IcinStatus icin_bivariate_fit(const double *x1,
                                   const double *x2,
                                   const double *weights,
                                   size_t n,
                                   struct IcinBivariate **out);

/*
 # Safety
 `model` must come from [`icin_bivariate_fit`] and not be used again.
 */
void icin_bivariate_free(struct IcinBivariate *model);

/*
 Functionals of pattern `pattern` in the order 0 = "00", 1 = "01",
 2 = "10", 3 = "11".

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum IcinStatus icin_bivariate_pattern_functionals(const struct IcinBivariate *model,
                                                   uint32_t pattern,
                                                   struct IcinPatternFunctionals *out);

/*
 `pr(M_item = 1 | X_item = x)` at `n` points; `item` is 1 or 2.

 # Safety
 `model` must be a live handle and `points` and `out` must hold `n` values.
 */
enum IcinStatus icin_bivariate_missingness_curve(const struct IcinBivariate *model,
                                                 size_t item,
                                                 const double *points,
                                                 size_t n,
                                                 double *out);

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *icin_last_error_message(void);

/*
 Library version as a static string.
 */
const char *icin_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICIN_H */
