#ifndef ISAR_H
#define ISAR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ISAR_METHOD_ZERO_FILL 0

#define ISAR_METHOD_NNM 1

#define ISAR_METHOD_IALM 2

#define ISAR_METHOD_DIP 3

#define ISAR_MASK_PIXEL 0

#define ISAR_MASK_COLUMN 1

#define ISAR_MASK_COMPRESSED 2

/**
 * Result code of every call.
 */
typedef enum IsarStatus {
  ISAR_STATUS_OK = 0,
  ISAR_STATUS_NULL_POINTER = 1,
  ISAR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or inconsistent data (bad file, dimension mismatch, ...).
   */
  ISAR_STATUS_DATA_ERROR = 3,
  ISAR_STATUS_IO = 4,
  /**
   * The solver stopped without meeting its tolerance; outputs are still set.
   */
  ISAR_STATUS_NOT_CONVERGED = 5,
  ISAR_STATUS_PANIC = 6,
} IsarStatus;

/**
 * Opaque sampling mask.
 */
typedef struct IsarMask IsarMask;

/**
 * Opaque complex matrix.
 */
typedef struct IsarMatrix IsarMatrix;

/**
 * Image-domain scores of an estimate against a reference.
 */
typedef struct IsarScores {
  double rmse;
  double correlation;
  double contrast;
  double snr_db;
} IsarScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t isar_last_error(char *buf, size_t len);

/**
 * Builds a matrix from `2·rows·cols` interleaved doubles.
 *
 * # Safety
 * `data` must point to `2·rows·cols` readable doubles; `out` must be writable.
 */
enum IsarStatus isar_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct IsarMatrix **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not yet freed.
 */
void isar_matrix_free(struct IsarMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` must be writable.
 */
enum IsarStatus isar_matrix_dims(const struct IsarMatrix *m, size_t *rows, size_t *cols);

/**
 * Copies the entries as interleaved doubles into `buf`, which must hold
 * `len >= 2·rows·cols` values.
 *
 * # Safety
 * `m` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum IsarStatus isar_matrix_copy(const struct IsarMatrix *m, double *buf, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IsarStatus isar_matrix_load(const char *path, struct IsarMatrix **out);

/**
 * # Safety
 * `m` must be a live handle; `path` a NUL-terminated string.
 */
enum IsarStatus isar_matrix_save(const struct IsarMatrix *m, const char *path);

/**
 * Echo of `count` random unit scatterers on an `n_angle × n_freq` grid with
 * default radar parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum IsarStatus isar_simulate_random(size_t n_angle,
                                     size_t n_freq,
                                     size_t count,
                                     uint64_t seed,
                                     struct IsarMatrix **out);

/**
 * Unnormalized range-Doppler image of an echo.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum IsarStatus isar_rd_image(const struct IsarMatrix *m, struct IsarMatrix **out);

/**
 * Adds white complex Gaussian noise at exactly `snr_db` (empirical).
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum IsarStatus isar_add_noise(const struct IsarMatrix *m,
                               double snr_db,
                               uint64_t seed,
                               struct IsarMatrix **out);

/**
 * `kind` is one of the `ISAR_MASK_*` constants; `ratio` is the missing
 * fraction in `[0, 1)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum IsarStatus isar_mask_generate(int kind,
                                   double ratio,
                                   size_t rows,
                                   size_t cols,
                                   uint64_t seed,
                                   struct IsarMask **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not yet freed.
 */
void isar_mask_free(struct IsarMask *m);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum IsarStatus isar_mask_missing_fraction(const struct IsarMask *m, double *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IsarStatus isar_mask_load(const char *path, struct IsarMask **out);

/**
 * # Safety
 * `m` must be a live handle; `path` a NUL-terminated string.
 */
enum IsarStatus isar_mask_save(const struct IsarMask *m, const char *path);

/**
 * Completes the unobserved entries of `m`. `method` is one of the
 * `ISAR_METHOD_*` constants. `config_path` may be null for default solver
 * and network settings, or name an INI file with `[solver]`/`[dip]`
 * sections. Returns `NotConverged` (with `*out` set) when an iterative
 * solver stops at its iteration cap.
 *
 * # Safety
 * `m` and `mask` must be live handles; `config_path` null or a
 * NUL-terminated string; `out` must be writable.
 */
enum IsarStatus isar_complete(int method,
                              const struct IsarMatrix *m,
                              const struct IsarMask *mask,
                              uint64_t seed,
                              const char *config_path,
                              struct IsarMatrix **out);

/**
 * Scores the image of `estimate` against the image of `reference` (both
 * given as echoes).
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum IsarStatus isar_score(const struct IsarMatrix *reference,
                           const struct IsarMatrix *estimate,
                           struct IsarScores *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAR_H */
