#ifndef LSCA_H
#define LSCA_H

/* Generated by cbindgen from lsca-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LscaStatus {
  LSCA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LSCA_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LSCA_STATUS_UTF8 = 2,
  /**
   * File could not be read or written.
   */
  LSCA_STATUS_IO = 3,
  /**
   * File exists but is not a valid container.
   */
  LSCA_STATUS_CORRUPT = 4,
  /**
   * Invalid argument or query (unknown terms, bad metric id, ...).
   */
  LSCA_STATUS_INVALID = 5,
  /**
   * Numerical factorization failed.
   */
  LSCA_STATUS_NUMERIC = 6,
  /**
   * Output buffer capacity is below the required length.
   */
  LSCA_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * Internal panic was caught at the boundary.
   */
  LSCA_STATUS_PANIC = 8,
} LscaStatus;

/**
 * An opaque loaded model: the embedding, its weighting, labels and the
 * preprocessing pipeline for incoming query text.
 */
typedef struct LscaModel LscaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static NUL-terminated string.
 */
const char *lsca_version(void);

/**
 * Message of the last failure on this thread. Valid until the next
 * library call on the same thread; empty string when no error occurred.
 */
const char *lsca_last_error(void);

/**
 * Load a fitted model container from `path` into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 * The returned handle must be released with `lsca_model_free`.
 */
enum LscaStatus lsca_model_load(const char *path, struct LscaModel **out);

/**
 * Fit a model from an ingested matrix container and write it to
 * `model_out`. `method`: 0 = lsa, 1 = ca. `scheme`: 0 = raw,
 * 1 = nrowl1, 2 = nrowl2, 3 = tfidf.
 *
 * # Safety
 * `matrix_path` and `model_out` must be NUL-terminated strings.
 */
enum LscaStatus lsca_fit(const char *matrix_path,
                         int32_t method,
                         int32_t scheme,
                         size_t k,
                         double alpha,
                         const char *model_out);

/**
 * Release a handle. Passing null is a no-op.
 *
 * # Safety
 * `m` must be a handle from `lsca_model_load`, not yet freed.
 */
void lsca_model_free(struct LscaModel *m);

/**
 * Number of documents, or 0 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
size_t lsca_model_docs(const struct LscaModel *m);

/**
 * Vocabulary size, or 0 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
size_t lsca_model_terms(const struct LscaModel *m);

/**
 * Retained dimensions, or 0 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
size_t lsca_model_k(const struct LscaModel *m);

/**
 * The exponent applied to the singular values; NaN for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
double lsca_model_alpha(const struct LscaModel *m);

/**
 * 0 = lsa, 1 = ca; -1 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
int32_t lsca_model_method(const struct LscaModel *m);

/**
 * 0 = raw, 1 = nrowl1, 2 = nrowl2, 3 = tfidf; -1 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
int32_t lsca_model_scheme(const struct LscaModel *m);

/**
 * Change the exponent under which coordinates and projections are
 * produced.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum LscaStatus lsca_model_set_alpha(struct LscaModel *m, double alpha);

/**
 * Copy the singular values into `out` (capacity `len`, needs `k`).
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum LscaStatus lsca_model_sigma(const struct LscaModel *m, double *out, size_t len);

/**
 * Copy document coordinates at the current exponent, row-major
 * `docs x k`, into `out` (capacity `len` doubles).
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum LscaStatus lsca_model_doc_coordinates(const struct LscaModel *m, double *out, size_t len);

/**
 * Copy term coordinates at the current exponent, row-major `terms x k`,
 * into `out` (capacity `len` doubles).
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum LscaStatus lsca_model_term_coordinates(const struct LscaModel *m, double *out, size_t len);

/**
 * Preprocess `text` with the model's pipeline, weigh it with the fitted
 * scheme and fold it into the document space at the current exponent.
 * Writes `k` doubles.
 *
 * # Safety
 * `m` must be a live handle; `text` a NUL-terminated string; `out` must
 * hold `len` doubles.
 */
enum LscaStatus lsca_model_project_text(const struct LscaModel *m,
                                        const char *text,
                                        double *out,
                                        size_t len);

/**
 * Rank every document against `text`. `metric`: 0 = euclidean distance
 * (ascending), 1 = dot product, 2 = cosine (both descending). Writes the
 * document indices in rank order to `indices` and the matching scores to
 * `scores`; both buffers need capacity for all documents.
 *
 * # Safety
 * `m` must be a live handle; `text` a NUL-terminated string; `indices`
 * and `scores` must each hold `len` elements.
 */
enum LscaStatus lsca_model_query_text(const struct LscaModel *m,
                                      const char *text,
                                      int32_t metric,
                                      size_t *indices,
                                      double *scores,
                                      size_t len);

/**
 * Copy the NUL-terminated id of document `index` into `buf`. On
 * `LSCA_STATUS_BUFFER_TOO_SMALL`, `*needed` (when non-null) receives the
 * required capacity including the terminator.
 *
 * # Safety
 * `m` must be a live handle; `buf` must hold `cap` bytes.
 */
enum LscaStatus lsca_model_doc_id(const struct LscaModel *m,
                                  size_t index,
                                  char *buf,
                                  size_t cap,
                                  size_t *needed);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LSCA_H */
