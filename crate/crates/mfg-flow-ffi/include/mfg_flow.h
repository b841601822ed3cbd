/* C interface to the mfg-flow finite-state mean-field game solver. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum MfgStatus {
  MFG_OK = 0,
  /**
   * Null pointer, bad UTF-8, wrong dimensions, or out-of-range value.
   */
  MFG_INVALID_ARGUMENT = 1,
  /**
   * Unparsable or inconsistent configuration.
   */
  MFG_CONFIG_ERROR = 2,
  /**
   * Solver failure: CFL violation, non-convergence, non-finite data.
   */
  MFG_NUMERICAL_ERROR = 3,
  MFG_IO_ERROR = 4,
  /**
   * Output buffer shorter than the required length.
   */
  MFG_BUFFER_TOO_SMALL = 5,
} MfgStatus;

/**
 * Opaque game handle.
 */
typedef struct MfgModelHandle MfgModelHandle;

/**
 * Opaque solver-result handle.
 */
typedef struct MfgSolutionHandle MfgSolutionHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread; valid until the next API call.
 */
const char *mfg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfg_version(void);

/**
 * Load a model configuration file (TOML) and instantiate the game.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 * On success `*out` owns the handle; release it with
 * [`mfg_model_free`].
 */
enum MfgStatus mfg_model_load(const char *path, struct MfgModelHandle **out);

/**
 * Instantiate a game from model-config TOML text.
 *
 * # Safety
 * As for [`mfg_model_load`].
 */
enum MfgStatus mfg_model_from_toml(const char *text, struct MfgModelHandle **out);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from a model constructor and not be used again.
 */
void mfg_model_free(struct MfgModelHandle *handle);

/**
 * Number of states d, or 0 on a null handle.
 *
 * # Safety
 * `handle` must be a live model handle or null.
 */
uintptr_t mfg_model_num_states(const struct MfgModelHandle *handle);

/**
 * Terminal-cost parameter dimension k, or 0 on a null handle.
 *
 * # Safety
 * `handle` must be a live model handle or null.
 */
uintptr_t mfg_model_param_dim(const struct MfgModelHandle *handle);

/**
 * The model's default horizon T, or NaN on a null handle.
 *
 * # Safety
 * `handle` must be a live model handle or null.
 */
double mfg_model_horizon(const struct MfgModelHandle *handle);

/**
 * Solve one game instance by damped Picard iteration on a uniform grid
 * with `steps` steps over `[0, horizon]`. Pass `tol <= 0` or
 * `max_iter == 0` for the defaults (1e-9, 500).
 *
 * # Safety
 * `eta` must point to `eta_len` doubles, `kappa` to `kappa_len`
 * doubles, and `out` must be valid. On success `*out` owns the
 * solution; release it with [`mfg_solution_free`].
 */
enum MfgStatus mfg_picard_solve(const struct MfgModelHandle *model,
                                const double *eta,
                                uintptr_t eta_len,
                                const double *kappa,
                                uintptr_t kappa_len,
                                double horizon,
                                uintptr_t steps,
                                double tol,
                                uintptr_t max_iter,
                                struct MfgSolutionHandle **out);

/**
 * Release a solution handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from [`mfg_picard_solve`] and not be used again.
 */
void mfg_solution_free(struct MfgSolutionHandle *handle);

/**
 * Grid points M + 1, or 0 on a null handle.
 *
 * # Safety
 * `handle` must be a live solution handle or null.
 */
uintptr_t mfg_solution_num_points(const struct MfgSolutionHandle *handle);

/**
 * Number of states d, or 0 on a null handle.
 *
 * # Safety
 * `handle` must be a live solution handle or null.
 */
uintptr_t mfg_solution_num_states(const struct MfgSolutionHandle *handle);

/**
 * Picard iterations used, or 0 on a null handle.
 *
 * # Safety
 * `handle` must be a live solution handle or null.
 */
uintptr_t mfg_solution_iterations(const struct MfgSolutionHandle *handle);

/**
 * 1 when the solve converged, else 0.
 *
 * # Safety
 * `handle` must be a live solution handle or null.
 */
int32_t mfg_solution_converged(const struct MfgSolutionHandle *handle);

/**
 * Copy the value function into `buf` as a row-major (M+1) x d array.
 *
 * # Safety
 * `buf` must point to at least `len` doubles.
 */
enum MfgStatus mfg_solution_value_function(const struct MfgSolutionHandle *handle,
                                           double *buf,
                                           uintptr_t len);

/**
 * Copy the distribution flow into `buf` as a row-major (M+1) x d array.
 *
 * # Safety
 * `buf` must point to at least `len` doubles.
 */
enum MfgStatus mfg_solution_distribution(const struct MfgSolutionHandle *handle,
                                         double *buf,
                                         uintptr_t len);

/**
 * Recover the distribution flow from an externally supplied value
 * table `u` (row-major (steps+1) x d, e.g. a learned operator's
 * output) by stepping the forward equation; writes a row-major
 * (steps+1) x d array into `mu_out`.
 *
 * # Safety
 * `u` must point to `(steps + 1) * d` doubles, `eta` to `d` doubles,
 * and `mu_out` to at least `mu_len` doubles.
 */
enum MfgStatus mfg_kfp_reconstruct(const struct MfgModelHandle *model,
                                   const double *u,
                                   const double *eta,
                                   double horizon,
                                   uintptr_t steps,
                                   double *mu_out,
                                   uintptr_t mu_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
