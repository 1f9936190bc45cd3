#ifndef INSDIFF_H
#define INSDIFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum InsdiffStatus {
  INSDIFF_STATUS_OK = 0,
  INSDIFF_STATUS_NULL_POINTER = 1,
  INSDIFF_STATUS_INVALID_UTF8 = 2,
  /**
   * Output buffer too small; nothing was written.
   */
  INSDIFF_STATUS_BUFFER_TOO_SMALL = 3,
  INSDIFF_STATUS_IO = 4,
  INSDIFF_STATUS_PARSE = 5,
  /**
   * Arguments outside the operation's domain.
   */
  INSDIFF_STATUS_INVALID_ARGUMENT = 6,
  INSDIFF_STATUS_CHECKPOINT = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  INSDIFF_STATUS_INTERNAL = 8,
} InsdiffStatus;

/**
 * Deletion strategy for [`insdiff_shrink`].
 */
typedef enum InsdiffShrinkMode {
  INSDIFF_SHRINK_MODE_SAMPLE = 0,
  INSDIFF_SHRINK_MODE_GREEDY = 1,
} InsdiffShrinkMode;

/**
 * A loaded checkpoint. Opaque to C.
 */
typedef struct InsdiffModel InsdiffModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *insdiff_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *insdiff_version(void);

/**
 * Loads a checkpoint. On success `*out` owns a handle to release with
 * [`insdiff_model_free`].
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum InsdiffStatus insdiff_model_load(const char *path, struct InsdiffModel **out);

/**
 * Releases a handle from [`insdiff_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must come from [`insdiff_model_load`] and not be freed twice.
 */
void insdiff_model_free(struct InsdiffModel *model);

/**
 * Writes the model's alphabet symbols (NUL-terminated) into `out`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` bytes.
 */
enum InsdiffStatus insdiff_model_alphabet(const struct InsdiffModel *model,
                                          char *out,
                                          size_t capacity);

/**
 * `log q(x without position i | x, M = 1)` for every position `i`;
 * writes `strlen(seq)` values.
 *
 * # Safety
 * `model` must be a live handle, `seq` a NUL-terminated string and `out`
 * must hold `capacity` doubles.
 */
enum InsdiffStatus insdiff_score(const struct InsdiffModel *model,
                                 const char *seq,
                                 double *out,
                                 size_t capacity);

/**
 * Log-probability of deleting exactly `positions` from `seq`. Exact for
 * at most `max_exact` positions, otherwise a `n_mc`-order Monte-Carlo
 * estimate; `*exact` reports which.
 *
 * # Safety
 * Pointers must be valid; `positions` must hold `n_positions` entries.
 */
enum InsdiffStatus insdiff_score_set(const struct InsdiffModel *model,
                                     const char *seq,
                                     const size_t *positions,
                                     size_t n_positions,
                                     size_t max_exact,
                                     size_t n_mc,
                                     uint64_t seed,
                                     double *out_log_prob,
                                     bool *out_exact);

/**
 * Deletes `m` letters from `seq`, conditioning on the remaining budget at
 * every step; the NUL-terminated result goes to `out`.
 *
 * # Safety
 * Pointers must be valid; `out` must hold `capacity` bytes.
 */
enum InsdiffStatus insdiff_shrink(const struct InsdiffModel *model,
                                  const char *seq,
                                  size_t m,
                                  enum InsdiffShrinkMode mode,
                                  uint64_t seed,
                                  char *out,
                                  size_t capacity);

/**
 * Samples one sequence of `length` letters with `correctors` corrector
 * rounds per deletion.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` bytes.
 */
enum InsdiffStatus insdiff_generate(const struct InsdiffModel *model,
                                    size_t length,
                                    size_t correctors,
                                    uint64_t seed,
                                    char *out,
                                    size_t capacity);

/**
 * Natural log of the number of ways `x0` embeds in `xt` as a subsequence
 * (`-inf` when it does not). Compares raw bytes, so no alphabet is needed.
 *
 * # Safety
 * `x0` and `xt` must be NUL-terminated strings; `out` must be valid.
 */
enum InsdiffStatus insdiff_count_alignments_ln(const char *x0, const char *xt, double *out);

/**
 * Exact posterior over which letter of `xt` was inserted last given the
 * clean `x0`; writes `strlen(xt)` probabilities.
 *
 * # Safety
 * `x0` and `xt` must be NUL-terminated strings; `out` must hold `capacity` doubles.
 */
enum InsdiffStatus insdiff_target_distribution(const char *x0,
                                               const char *xt,
                                               double *out,
                                               size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INSDIFF_H */
