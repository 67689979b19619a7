#ifndef STVAE_H
#define STVAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Informative locations per field.
 */
#define STVAE_N_LOCATIONS 52

typedef enum StvaeStatus {
  STVAE_STATUS_OK = 0,
  STVAE_STATUS_NULL_POINTER = 1,
  STVAE_STATUS_INVALID_ARGUMENT = 2,
  STVAE_STATUS_SHAPE = 3,
  STVAE_STATUS_NON_FINITE = 4,
  STVAE_STATUS_NUMERICAL = 5,
  STVAE_STATUS_FORMAT = 6,
  STVAE_STATUS_IO = 7,
  STVAE_STATUS_TRAINING = 8,
  STVAE_STATUS_PANIC = 9,
} StvaeStatus;

/**
 * Opaque trained model.
 */
typedef struct StvaeModel StvaeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model file. On success `*out` owns a handle to free with
 * [`stvae_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum StvaeStatus stvae_model_load(const char *path, struct StvaeModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from [`stvae_model_load`] and not be used afterwards.
 */
void stvae_model_free(struct StvaeModel *model);

/**
 * Latent dimension of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t stvae_model_latent_dim(const struct StvaeModel *model);

/**
 * Encodes one field of `n_values` (= 52) decibel values into `code_out`
 * of length `code_len` (= latent dimension).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum StvaeStatus stvae_encode(const struct StvaeModel *model,
                              const double *values,
                              size_t n_values,
                              double *code_out,
                              size_t code_len);

/**
 * Decodes a latent code into 52 decibel values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum StvaeStatus stvae_decode(const struct StvaeModel *model,
                              const double *code,
                              size_t code_len,
                              double *values_out,
                              size_t n_values);

/**
 * Two-stage forecast of one series. `values` holds `n_visits` rows of 52
 * decibel values; `out` receives `n_horizons` rows of 52 predictions at
 * the absolute times in `horizons`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum StvaeStatus stvae_two_stage_predict(const struct StvaeModel *model,
                                         const double *times,
                                         const double *values,
                                         size_t n_visits,
                                         const double *horizons,
                                         size_t n_horizons,
                                         double *out);

/**
 * Leroux precision rho (D - W) + (1 - rho) I of a symmetric 0/1 adjacency
 * matrix, both `n` x `n` row-major.
 *
 * # Safety
 * `adjacency` and `out` must each hold `n * n` doubles.
 */
enum StvaeStatus stvae_leroux_precision(const double *adjacency, size_t n, double rho, double *out);

/**
 * Copies the calling thread's last error message (NUL-terminated,
 * truncated to fit) into `buf` and returns the full message length.
 * Call with a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t stvae_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STVAE_H */
