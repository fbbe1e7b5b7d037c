#ifndef CTR_NLI_H
#define CTR_NLI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtrNliStatus {
  CTR_NLI_STATUS_OK = 0,
  CTR_NLI_STATUS_NULL_POINTER = 1,
  CTR_NLI_STATUS_INVALID_UTF8 = 2,
  CTR_NLI_STATUS_INVALID_ARGUMENT = 3,
  CTR_NLI_STATUS_DATA_ERROR = 4,
  CTR_NLI_STATUS_PANIC = 5,
} CtrNliStatus;

typedef enum CtrNliLabel {
  CTR_NLI_LABEL_ENTAILMENT = 0,
  CTR_NLI_LABEL_CONTRADICTION = 1,
} CtrNliLabel;

/**
 * Opaque label lexicon.
 */
typedef struct CtrNliLexicon CtrNliLexicon;

/**
 * Opaque prompt part library.
 */
typedef struct CtrNliLibrary CtrNliLibrary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *ctr_nli_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ctr_nli_string_free(char *s);

/**
 * Static version string.
 */
const char *ctr_nli_version(void);

/**
 * The bundled part library. Never null.
 */
struct CtrNliLibrary *ctr_nli_library_default(void);

/**
 * Parses a part library from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CtrNliStatus ctr_nli_library_from_json(const char *json, struct CtrNliLibrary **out);

/**
 * # Safety
 * `lib` must come from this library and not have been freed. Null is ignored.
 */
void ctr_nli_library_free(struct CtrNliLibrary *lib);

/**
 * The default lexicon. Never null.
 */
struct CtrNliLexicon *ctr_nli_lexicon_default(void);

/**
 * Builds a lexicon from whitespace-separated token lists. `default_label` is
 * a `CtrNliLabel` value.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum CtrNliStatus ctr_nli_lexicon_new(const char *entail_tokens,
                                      const char *contra_tokens,
                                      int32_t default_label,
                                      struct CtrNliLexicon **out);

/**
 * # Safety
 * `lexicon` must come from this library and not have been freed. Null is ignored.
 */
void ctr_nli_lexicon_free(struct CtrNliLexicon *lexicon);

/**
 * Writes the wrapped instruction text for `combo` (e.g. "t4.c1.s5.o4"),
 * with its evidence and statement slots unresolved.
 *
 * # Safety
 * `lib` must be a live handle; `combo` NUL-terminated; `out` writable.
 */
enum CtrNliStatus ctr_nli_compose(const struct CtrNliLibrary *lib, const char *combo, char **out);

/**
 * Renders a full prompt. `secondary` may be null for single-trial statements.
 *
 * # Safety
 * `lib` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum CtrNliStatus ctr_nli_render(const struct CtrNliLibrary *lib,
                                 const char *combo,
                                 const char *primary,
                                 const char *secondary,
                                 const char *statement,
                                 char **out);

/**
 * Maps a generation to a label. A null `lexicon` uses the default one.
 *
 * # Safety
 * `lexicon` must be null or a live handle; `text` NUL-terminated; `out` writable.
 */
enum CtrNliStatus ctr_nli_extract_label(const struct CtrNliLexicon *lexicon,
                                        const char *text,
                                        enum CtrNliLabel *out);

/**
 * Negates a statement. `low_confidence` may be null.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` writable; `low_confidence` null or writable.
 */
enum CtrNliStatus ctr_nli_negate(const char *text, char **out, bool *low_confidence);

/**
 * Scores a predictions JSON object against a split JSON document and writes
 * the evaluation report as JSON.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum CtrNliStatus ctr_nli_evaluate_json(const char *predictions_json,
                                        const char *split_json,
                                        char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTR_NLI_H */
