#ifndef CARDGAUGE_H
#define CARDGAUGE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for fallible calls.
 */
typedef enum {
  CG_STATUS_OK = 0,
  CG_STATUS_NULL_ARGUMENT = 1,
  CG_STATUS_INVALID_UTF8 = 2,
  CG_STATUS_EMPTY_INPUT = 3,
  CG_STATUS_IO = 4,
  CG_STATUS_PARSE = 5,
  CG_STATUS_INVALID_ARGUMENT = 6,
  CG_STATUS_INTERNAL = 7,
} CgStatus;

/**
 * Opaque word-histogram handle.
 */
typedef struct CgHistogram CgHistogram;

/**
 * Opaque heading-tree handle.
 */
typedef struct CgToc CgToc;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *cg_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread; do not free.
 */
const char *cg_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer previously returned by a `cg_` function
 * that allocates a string, not yet freed.
 */
void cg_string_free(char *s);

/**
 * Parses Markdown into a heading tree. Never fails on content; returns
 * NULL only for NULL/invalid-UTF-8 input.
 *
 * # Safety
 * `markdown` must be NULL or a valid NUL-terminated string.
 */
CgToc *cg_toc_parse(const char *markdown);

/**
 * # Safety
 * `toc` must be NULL or a pointer from [`cg_toc_parse`], not yet freed.
 */
void cg_toc_free(CgToc *toc);

/**
 * Number of headings in the tree (root excluded); -1 if `toc` is NULL.
 *
 * # Safety
 * `toc` must be NULL or a live pointer from [`cg_toc_parse`].
 */
int64_t cg_toc_heading_count(const CgToc *toc);

/**
 * Serializes the tree; `format` is `"dot"` or `"json"`.
 *
 * # Safety
 * `toc` must be a live pointer from [`cg_toc_parse`]; `format` a valid
 * NUL-terminated string.
 */
char *cg_toc_export(const CgToc *toc, const char *format);

/**
 * Heading paths of the tree as a JSON array of strings, document order.
 *
 * # Safety
 * `toc` must be a live pointer from [`cg_toc_parse`].
 */
char *cg_toc_heading_paths_json(const CgToc *toc);

/**
 * Generalized Levenshtein distance (insertion 1, deletion 1,
 * substitution 2) between two UTF-8 strings.
 *
 * # Safety
 * `a`, `b` must be valid NUL-terminated strings; `out` a valid pointer.
 */
CgStatus cg_gld(const char *a, const char *b, uint64_t *out);

/**
 * NLSS score of a card heading path against a template heading path.
 *
 * # Safety
 * As [`cg_gld`].
 */
CgStatus cg_nlss(const char *hf_path, const char *zd_path, double *out_score);

/**
 * # Safety
 * As [`cg_gld`].
 */
CgStatus cg_nld_ratio(const char *a, const char *b, double *out_score);

/**
 * Token-sorted variant of [`cg_nld_ratio`].
 *
 * # Safety
 * As [`cg_gld`].
 */
CgStatus cg_nld_sorted(const char *a, const char *b, double *out_score);

/**
 * Runs the token filtering pipeline; returns a JSON array of tokens.
 * `stop_words_path` NULL selects the builtin stop-word list.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `stop_words_path` NULL or
 * likewise valid.
 */
char *cg_tokenize_json(const char *text,
                       const char *stop_words_path,
                       uintptr_t max_x_occurrences,
                       bool lowercase);

/**
 * Builds a histogram over the filtered tokens of `text`.
 *
 * # Safety
 * As [`cg_tokenize_json`].
 */
CgHistogram *cg_histogram_from_text(const char *text,
                                    const char *stop_words_path,
                                    uintptr_t max_x_occurrences,
                                    bool lowercase);

/**
 * Loads a TSV histogram file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
CgHistogram *cg_histogram_load(const char *path);

/**
 * Saves a histogram as deterministic TSV.
 *
 * # Safety
 * `hist` must be a live histogram handle; `path` a valid string.
 */
CgStatus cg_histogram_save(const CgHistogram *hist, const char *path);

/**
 * Pointwise sum of two histograms as a new handle.
 *
 * # Safety
 * Both arguments must be live histogram handles.
 */
CgHistogram *cg_histogram_merge(const CgHistogram *a, const CgHistogram *b);

/**
 * # Safety
 * `hist` must be NULL or a live histogram handle.
 */
uint64_t cg_histogram_total(const CgHistogram *hist);

/**
 * # Safety
 * `hist` must be NULL or a live histogram handle.
 */
uint64_t cg_histogram_vocabulary_size(const CgHistogram *hist);

/**
 * Occurrence count of one word.
 *
 * # Safety
 * `hist` must be NULL or a live handle; `word` a valid string.
 */
uint64_t cg_histogram_count(const CgHistogram *hist, const char *word);

/**
 * # Safety
 * `hist` must be NULL or a handle not yet freed.
 */
void cg_histogram_free(CgHistogram *hist);

/**
 * Compares two histograms; returns the comparison summary as JSON
 * (common-word counts, intersection, cosine, both KL directions).
 *
 * # Safety
 * Both arguments must be live histogram handles.
 */
char *cg_compare_histograms_json(const CgHistogram *left, const CgHistogram *right);

/**
 * Scores a card against a template (both as Markdown) using the builtin
 * stop-word list; returns the score breakdown as JSON.
 *
 * # Safety
 * `card_markdown` and `template_markdown` must be valid NUL-terminated
 * strings.
 */
char *cg_score_card_json(const char *card_markdown,
                         const char *template_markdown,
                         double nlss_threshold,
                         double nld_threshold);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CARDGAUGE_H */
