#ifndef BINNO_H
#define BINNO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BinnoStatus {
  BINNO_STATUS_OK = 0,
  BINNO_STATUS_NULL_POINTER = 1,
  BINNO_STATUS_INVALID_ARGUMENT = 2,
  BINNO_STATUS_DIMENSION_MISMATCH = 3,
  BINNO_STATUS_NON_FINITE = 4,
  /**
   * The solver stopped early; outputs are still written.
   */
  BINNO_STATUS_STALLED = 5,
  BINNO_STATUS_SOLVER_FAILURE = 6,
  BINNO_STATUS_IO = 7,
  BINNO_STATUS_PANIC = 8,
} BinnoStatus;

typedef enum BinnoTrace {
  BINNO_TRACE_PSI1 = 0,
  BINNO_TRACE_PSI2 = 1,
  BINNO_TRACE_ALPHA = 2,
  BINNO_TRACE_BETA = 3,
  BINNO_TRACE_NU = 4,
} BinnoTrace;

/**
 * Dense real matrix.
 */
typedef struct BinnoMatrix BinnoMatrix;

/**
 * Run report of a solve.
 */
typedef struct BinnoReport BinnoReport;

typedef struct BinnoSlrfParams {
  double lambda1;
  double lambda2;
  double gamma1;
  double gamma2;
  size_t rank;
} BinnoSlrfParams;

typedef struct BinnoSolverOptions {
  size_t max_iters;
  double tol;
  double nu_min;
  double safety_factor;
  uint64_t seed;
} BinnoSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *binno_last_error(void);

struct BinnoSlrfParams binno_slrf_params_default(void);

struct BinnoSolverOptions binno_solver_options_default(void);

/**
 * Copies `rows * cols` row-major values into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` must be writable.
 */
enum BinnoStatus binno_matrix_new(size_t rows,
                                  size_t cols,
                                  const double *data,
                                  struct BinnoMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a handle returned by this library and not yet freed.
 */
void binno_matrix_free(struct BinnoMatrix *m);

/**
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t binno_matrix_rows(const struct BinnoMatrix *m);

/**
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t binno_matrix_cols(const struct BinnoMatrix *m);

/**
 * Copies the entries row-major into `out`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live matrix handle and `out` must hold `len` writable doubles.
 */
enum BinnoStatus binno_matrix_copy_data(const struct BinnoMatrix *m, double *out, size_t len);

/**
 * Reads a headerless comma-separated matrix.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BinnoStatus binno_matrix_load_csv(const char *path, struct BinnoMatrix **out);

/**
 * Generates the observed matrix of a synthetic sparse factorization instance.
 *
 * # Safety
 * `out` must be writable.
 */
enum BinnoStatus binno_generate_synthetic(size_t m,
                                          size_t n,
                                          size_t rank,
                                          double sparsity,
                                          double noise_std,
                                          uint64_t seed,
                                          struct BinnoMatrix **out);

/**
 * Factorizes `m` as `X Y`. Writes all three outputs on `Ok` and on `Stalled`.
 * `options` may be NULL for defaults.
 *
 * # Safety
 * `m` and `params` must be valid; the out-pointers must be writable.
 */
enum BinnoStatus binno_solve_slrf(const struct BinnoMatrix *m,
                                  const struct BinnoSlrfParams *params,
                                  const struct BinnoSolverOptions *options,
                                  struct BinnoMatrix **out_x,
                                  struct BinnoMatrix **out_y,
                                  struct BinnoReport **out_report);

/**
 * # Safety
 * `r` must be NULL or a handle returned by this library and not yet freed.
 */
void binno_report_free(struct BinnoReport *r);

/**
 * # Safety
 * `r` must be NULL or a live report handle.
 */
size_t binno_report_iterations(const struct BinnoReport *r);

/**
 * 1 if the run met the stopping tolerance, 0 otherwise.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
int binno_report_converged(const struct BinnoReport *r);

/**
 * Relative reconstruction error of the run, NaN if unavailable.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
double binno_report_relative_error(const struct BinnoReport *r);

/**
 * Length of a per-iteration trace.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
size_t binno_report_trace_len(const struct BinnoReport *r, enum BinnoTrace which);

/**
 * Copies up to `len` entries of a trace into `out`; `written` receives the count.
 *
 * # Safety
 * `r` must be a live report handle, `out` must hold `len` doubles and
 * `written` must be writable.
 */
enum BinnoStatus binno_report_copy_trace(const struct BinnoReport *r,
                                         enum BinnoTrace which,
                                         double *out,
                                         size_t len,
                                         size_t *written);

/**
 * Report as a JSON string; release it with [`binno_string_free`]. NULL on failure.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
char *binno_report_to_json(const struct BinnoReport *r);

/**
 * # Safety
 * `s` must be NULL or a string returned by [`binno_report_to_json`].
 */
void binno_string_free(char *s);

/**
 * `||m - l||_F / ||m||_F`.
 *
 * # Safety
 * `m`, `l` must be live matrix handles; `out` must be writable.
 */
enum BinnoStatus binno_relative_error(const struct BinnoMatrix *m,
                                      const struct BinnoMatrix *l,
                                      double *out);

/**
 * Peak signal-to-noise ratio in dB; `+inf` for identical inputs.
 *
 * # Safety
 * `reference`, `estimate` must be live matrix handles; `out` must be writable.
 */
enum BinnoStatus binno_psnr(const struct BinnoMatrix *reference,
                            const struct BinnoMatrix *estimate,
                            double max_value,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BINNO_H */
