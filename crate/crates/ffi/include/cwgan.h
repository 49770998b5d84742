#ifndef CWGAN_H
#define CWGAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum {
  CWGAN_STATUS_OK = 0,
  CWGAN_STATUS_NULL_POINTER = 1,
  CWGAN_STATUS_INVALID_ARGUMENT = 2,
  CWGAN_STATUS_SHAPE = 3,
  CWGAN_STATUS_IO = 4,
  CWGAN_STATUS_NUMERICAL = 5,
  CWGAN_STATUS_PANIC = 6,
} CwganStatus;

/**
 * A loaded generator with its parameters and grid.
 */
typedef struct CwganGenerator CwganGenerator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cwgan_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cwgan_version(void);

/**
 * Loads a checkpoint written by `cwgan train` (the `.cwpm` file with its
 * `.json` sidecar) and stores a new handle in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
CwganStatus cwgan_generator_load(const char *path, CwganGenerator **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `gen` must come from [`cwgan_generator_load`] and not be used afterwards.
 */
void cwgan_generator_free(CwganGenerator *gen);

/**
 * Grid rows, columns and latent dimension of a loaded generator.
 *
 * # Safety
 * `gen` must be a live handle; the outputs writable.
 */
CwganStatus cwgan_generator_dims(const CwganGenerator *gen,
                                 size_t *height,
                                 size_t *width,
                                 size_t *latent_dim);

/**
 * Pixel-wise posterior mean and SD of `draws` generator samples for the
 * measurement `y` (`len = height * width`, row-major). Results go to
 * `mean` and `sd`, each `len` doubles. Matches `cwgan infer` with the same
 * seed and index 0.
 *
 * # Safety
 * `gen` must be a live handle, `y` readable and the outputs writable for
 * `len` doubles.
 */
CwganStatus cwgan_posterior_stats(const CwganGenerator *gen,
                                  const double *y,
                                  size_t len,
                                  size_t draws,
                                  uint64_t seed,
                                  double *mean,
                                  double *sd);

/**
 * Implicit-Euler heat solve on `[0, 2 pi]^2` with `n x n` nodes and zero
 * boundary values: `u0` in, `u(T)` out, both `n * n` doubles.
 *
 * # Safety
 * `u0` readable and `out` writable for `n * n` doubles.
 */
CwganStatus cwgan_heat_forward(const double *u0,
                               size_t n,
                               double kappa,
                               double t_final,
                               size_t steps,
                               double *out);

/**
 * Steady conduction `-div(kappa grad u) = source` on the unit square with
 * `n x n` nodes and zero boundary values, by linear finite elements.
 *
 * # Safety
 * `kappa` readable and `out` writable for `n * n` doubles.
 */
CwganStatus cwgan_conduction_fem(const double *kappa, size_t n, double source, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CWGAN_H */
