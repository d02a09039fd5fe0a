#ifndef MENULAB_H
#define MENULAB_H

/* This file is generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MenulabStatus {
  MENULAB_STATUS_OK = 0,
  MENULAB_STATUS_NULL_ARGUMENT = 1,
  MENULAB_STATUS_INVALID_INPUT = 2,
  MENULAB_STATUS_SOLVER_FAILURE = 3,
  MENULAB_STATUS_PRECONDITION_FAILED = 4,
  MENULAB_STATUS_VALIDATION_FAILED = 5,
} MenulabStatus;

/**
 * Opaque marginal density handle.
 */
typedef struct MenulabDensity {
  uint8_t _unused[0];
} MenulabDensity;

/**
 * Opaque product-distribution handle.
 */
typedef struct MenulabProduct {
  uint8_t _unused[0];
} MenulabProduct;

/**
 * Opaque solved-mechanism handle.
 */
typedef struct MenulabMechanism {
  uint8_t _unused[0];
} MenulabMechanism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *menulab_version(void);

/**
 * Returns the last error message raised on this thread, or NULL. The caller
 * frees the string with `menulab_string_free`.
 */
char *menulab_last_error(void);

/**
 * Frees a string allocated by this library. NULL is accepted.
 *
 * # Safety
 * `s` must have been returned by a menulab function and not freed before.
 */
void menulab_string_free(char *s);

/**
 * Builds a density from a JSON spec like
 * `{"kind":"power","a":2.0,"b":-2.0,"support":[1,2]}`.
 * Returns NULL on failure (see `menulab_last_error`).
 *
 * # Safety
 * `json` must be a valid NUL-terminated string.
 */
struct MenulabDensity *menulab_density_from_json(const char *json);

/**
 * # Safety
 * `handle` must come from `menulab_density_from_json` and not be freed twice.
 */
void menulab_density_free(struct MenulabDensity *handle);

/**
 * Power rate `x f'(x) / f(x)` at an interior point of the support.
 *
 * # Safety
 * `density` must be a live density handle; `out` must be writable.
 */
enum MenulabStatus menulab_density_power_rate(const struct MenulabDensity *density,
                                              double x,
                                              double *out);

/**
 * Cumulative distribution function at `x` (clamped to `[0, 1]`).
 *
 * # Safety
 * `density` must be a live density handle; `out` must be writable.
 */
enum MenulabStatus menulab_density_cdf(const struct MenulabDensity *density, double x, double *out);

/**
 * Builds an independent product distribution; the input densities are
 * copied and stay owned by the caller.
 *
 * # Safety
 * Both arguments must be live density handles.
 */
struct MenulabProduct *menulab_product_new(const struct MenulabDensity *dx,
                                           const struct MenulabDensity *dy);

/**
 * # Safety
 * `handle` must come from `menulab_product_new` and not be freed twice.
 */
void menulab_product_free(struct MenulabProduct *handle);

/**
 * The field `3 f1 f2 + x f1' f2 + y f2' f1` at an interior point.
 *
 * # Safety
 * `product` must be a live product handle; `out` must be writable.
 */
enum MenulabStatus menulab_product_delta(const struct MenulabProduct *product,
                                         double x,
                                         double y,
                                         double *out);

/**
 * Grid-certified check of power-rate condition `id` (1..=5); writes whether
 * it holds and the worst margin.
 *
 * # Safety
 * `product` must be a live product handle; out pointers must be writable.
 */
enum MenulabStatus menulab_check_condition(const struct MenulabProduct *product,
                                           unsigned int id,
                                           unsigned int grid_n,
                                           int *out_holds,
                                           double *out_margin);

/**
 * First-order stochastic dominance of `g` over `f` on a shared grid.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum MenulabStatus menulab_fosd_dominates(const struct MenulabDensity *g,
                                          const struct MenulabDensity *f,
                                          unsigned int grid_n,
                                          int *out);

/**
 * Solves the optimal-mechanism LP on an `n x n` midpoint discretization.
 * Returns NULL on failure.
 *
 * # Safety
 * `product` must be a live product handle.
 */
struct MenulabMechanism *menulab_solve_optimal(const struct MenulabProduct *product,
                                               unsigned int n,
                                               int unit_demand);

/**
 * # Safety
 * `handle` must come from `menulab_solve_optimal` and not be freed twice.
 */
void menulab_mechanism_free(struct MenulabMechanism *handle);

/**
 * Expected revenue of the solved mechanism on its instance.
 *
 * # Safety
 * `mechanism` must be a live mechanism handle; `out` must be writable.
 */
enum MenulabStatus menulab_mechanism_revenue(const struct MenulabMechanism *mechanism, double *out);

/**
 * Extracted menu as CSV text (`q1,q2,t` rows, 12 significant digits). The
 * caller frees the string with `menulab_string_free`.
 *
 * # Safety
 * `mechanism` must be a live mechanism handle.
 */
char *menulab_mechanism_menu_csv(const struct MenulabMechanism *mechanism, double cluster_tol);

/**
 * Whether the extracted menu is monotone (payments strictly increasing,
 * allocations weakly increasing).
 *
 * # Safety
 * `mechanism` must be a live mechanism handle; `out` must be writable.
 */
enum MenulabStatus menulab_mechanism_menu_monotone(const struct MenulabMechanism *mechanism,
                                                   double cluster_tol,
                                                   int *out);

/**
 * Raw (1e-9 deduplicated) and clustered menu-item counts.
 *
 * # Safety
 * `mechanism` must be a live mechanism handle; out pointers writable.
 */
enum MenulabStatus menulab_mechanism_count_items(const struct MenulabMechanism *mechanism,
                                                 double cluster_tol,
                                                 unsigned int *out_raw,
                                                 unsigned int *out_clustered);

/**
 * Separate-sale revenue (one posted price per item).
 *
 * # Safety
 * `product` must be a live product handle; `out` must be writable.
 */
enum MenulabStatus menulab_separate_revenue(const struct MenulabProduct *product, double *out);

/**
 * Optimal bundle price and its revenue.
 *
 * # Safety
 * `product` must be a live product handle; out pointers writable.
 */
enum MenulabStatus menulab_bundle_revenue(const struct MenulabProduct *product,
                                          double *out_price,
                                          double *out_revenue);

/**
 * Runs a scenario config file end to end. Returns the CLI exit code:
 * 0 success, 1 an asserted check failed, 2 config error, 3 solver error.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
int menulab_run_config(const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MENULAB_H */
