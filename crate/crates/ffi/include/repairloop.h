#ifndef REPAIRLOOP_H
#define REPAIRLOOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlFormula {
  RL_FORMULA_OCHIAI = 0,
  RL_FORMULA_JACCARD = 1,
  RL_FORMULA_TARANTULA = 2,
} RlFormula;

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_INVALID_UTF8 = 3,
  RL_STATUS_NOT_FOUND = 4,
  RL_STATUS_IO = 5,
  RL_STATUS_COMPILE_FAILED = 6,
  RL_STATUS_EXTRACTION = 7,
  RL_STATUS_INTERNAL = 99,
} RlStatus;

/**
 * A filtered, ordered list of suspicious lines.
 */
typedef struct RlRanking RlRanking;

/**
 * Accumulates per-test verdicts and executed lines.
 */
typedef struct RlSpectrum RlSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a
 * successful call. Valid until the next call on the same thread.
 */
const char *rl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void rl_string_free(char *s);

/**
 * Suspiciousness of one line from its four spectrum counts.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RlStatus rl_score(enum RlFormula formula,
                       uint32_t t_f,
                       uint32_t t_p,
                       uint32_t t_f_e,
                       uint32_t t_p_e,
                       double *out);

/**
 * Whitespace-tolerant output comparison.
 *
 * # Safety
 * Buffers must be valid for their lengths; `out_equal` must be valid.
 */
enum RlStatus rl_compare_output(const uint8_t *actual,
                                size_t actual_len,
                                const uint8_t *expected,
                                size_t expected_len,
                                bool *out_equal);

/**
 * Splits a model response into program text and reasoning.
 *
 * # Safety
 * `response` must be a NUL-terminated string; out-pointers must be valid.
 */
enum RlStatus rl_extract_patch(const char *response, char **out_code, char **out_reasoning);

struct RlSpectrum *rl_spectrum_new(void);

/**
 * # Safety
 * `sp` must be null or a handle from [`rl_spectrum_new`], not yet freed.
 */
void rl_spectrum_free(struct RlSpectrum *sp);

/**
 * Registers a test and its verdict. Ids must be unique.
 *
 * # Safety
 * `sp` must be a live handle; `test_id` a NUL-terminated string.
 */
enum RlStatus rl_spectrum_add_test(struct RlSpectrum *sp, const char *test_id, bool passed);

/**
 * Records that `test_id` executed `file:line`.
 *
 * # Safety
 * `sp` must be a live handle; strings NUL-terminated.
 */
enum RlStatus rl_spectrum_mark_executed(struct RlSpectrum *sp,
                                        const char *test_id,
                                        const char *file,
                                        uint32_t line);

/**
 * Scores every covered line and writes a new ranking handle to `out`.
 *
 * # Safety
 * `sp` must be a live handle; `out` must be valid.
 */
enum RlStatus rl_spectrum_rank(const struct RlSpectrum *sp,
                               enum RlFormula formula,
                               double threshold,
                               size_t fallback_k,
                               struct RlRanking **out);

/**
 * Compiles `source_path` with coverage, runs the tests in `tests_dir`
 * (`<n>.in` / `<n>.out` pairs) and ranks suspicious lines.
 * Returns `RL_STATUS_COMPILE_FAILED` when the program does not compile.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be valid.
 */
enum RlStatus rl_localize_file(const char *source_path,
                               const char *tests_dir,
                               enum RlFormula formula,
                               double threshold,
                               size_t fallback_k,
                               double timeout_secs,
                               struct RlRanking **out);

/**
 * # Safety
 * `r` must be null or a ranking handle, not yet freed.
 */
void rl_ranking_free(struct RlRanking *r);

/**
 * Number of entries; 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live ranking handle.
 */
size_t rl_ranking_len(const struct RlRanking *r);

/**
 * Entry `index`. `out_file` borrows from the ranking and stays valid
 * until the ranking is freed.
 *
 * # Safety
 * `r` must be a live handle; out-pointers must be valid.
 */
enum RlStatus rl_ranking_get(const struct RlRanking *r,
                             size_t index,
                             const char **out_file,
                             uint32_t *out_line,
                             double *out_score);

/**
 * Renders the ranking as `file:line<TAB>score` lines.
 *
 * # Safety
 * `r` must be a live handle; `out` must be valid.
 */
enum RlStatus rl_ranking_serialize(const struct RlRanking *r, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPAIRLOOP_H */
