#ifndef WSHEX_H
#define WSHEX_H

/* Generated by cbindgen from the wshex-ffi crate. Regenerate with `WSHEX_FFI_WRITE_HEADER=1 cargo test -p wshex-ffi --test header`; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WshexStatus {
  /**
   * The call succeeded; out-parameters are populated.
   */
  WSHEX_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  WSHEX_STATUS_NULL_ARGUMENT,
  /**
   * A string argument was not valid UTF-8.
   */
  WSHEX_STATUS_INVALID_UTF8,
  /**
   * The schema text did not parse; see `wshex_last_error`.
   */
  WSHEX_STATUS_PARSE_ERROR,
  /**
   * The schema parsed but cannot be compiled for validation.
   */
  WSHEX_STATUS_COMPILE_ERROR,
  /**
   * The requested shape is not defined by the schema.
   */
  WSHEX_STATUS_UNKNOWN_SHAPE,
  /**
   * The entity id is not of the `Q<number>`/`P<number>` form.
   */
  WSHEX_STATUS_INVALID_ENTITY_ID,
  /**
   * The dump text could not be ingested; see `wshex_last_error`.
   */
  WSHEX_STATUS_INGEST_ERROR,
  /**
   * A bug: the library panicked and the panic was contained.
   */
  WSHEX_STATUS_INTERNAL_ERROR,
} WshexStatus;

/**
 * Verdict of a single conformance check.
 */
typedef enum WshexVerdict {
  WSHEX_VERDICT_CONFORMING = 0,
  WSHEX_VERDICT_NON_CONFORMING,
  /**
   * The step budget cut evaluation short; not a conformance verdict.
   */
  WSHEX_VERDICT_ENGINE_LIMIT,
} WshexVerdict;

/**
 * A loaded entity graph (opaque).
 */
typedef struct WshexGraph WshexGraph;

/**
 * A parsed schema (opaque).
 */
typedef struct WshexSchema WshexSchema;

/**
 * A compiled validator bound to one schema (opaque).
 */
typedef struct WshexValidator WshexValidator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static string; never freed.
 */
const char *wshex_version(void);

/**
 * The message of the most recent failing call on this thread, or null
 * if no call has failed yet. The pointer stays valid until the next
 * failing call on the same thread; do not free it.
 */
const char *wshex_last_error(void);

/**
 * Release a string returned through an out-parameter. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void wshex_string_free(char *s);

/**
 * Parse WShEx compact syntax into a schema handle.
 *
 * # Safety
 * `text` must be null or NUL-terminated; `out` must be null or valid
 * for writes.
 */
enum WshexStatus wshex_schema_parse(const char *text, struct WshexSchema **out);

/**
 * Destroy a schema handle. Null is a no-op.
 *
 * # Safety
 * `schema` must have come from this library and not be freed twice.
 */
void wshex_schema_free(struct WshexSchema *schema);

/**
 * Number of shapes the schema defines; 0 for a null handle.
 *
 * # Safety
 * `schema` must be null or a live handle from this library.
 */
size_t wshex_schema_shape_count(const struct WshexSchema *schema);

/**
 * Render the schema back to compact syntax.
 *
 * # Safety
 * `schema` must be a live handle; `out` must be null or valid for
 * writes. The returned string is released with `wshex_string_free`.
 */
enum WshexStatus wshex_schema_render(const struct WshexSchema *schema, char **out);

/**
 * Load a Wikibase JSON entity-document dump (one document per line,
 * with or without the `[` / `]` frame) into a graph handle.
 *
 * # Safety
 * `text` must be null or NUL-terminated; `out` must be null or valid
 * for writes.
 */
enum WshexStatus wshex_graph_parse_dump(const char *text, struct WshexGraph **out);

/**
 * Destroy a graph handle. Null is a no-op.
 *
 * # Safety
 * `graph` must have come from this library and not be freed twice.
 */
void wshex_graph_free(struct WshexGraph *graph);

/**
 * Number of items the graph knows (as subject or value); 0 for a null
 * handle.
 *
 * # Safety
 * `graph` must be null or a live handle from this library.
 */
size_t wshex_graph_item_count(const struct WshexGraph *graph);

/**
 * Compile a validator for the schema. `step_budget` of 0 selects the
 * default budget; `pedantic` switches qualifier conjunction to the
 * literal (non-partitioning) reading.
 *
 * # Safety
 * `schema` must be a live handle; `out` must be null or valid for
 * writes. The validator does not borrow the schema handle — the
 * schema may be freed first.
 */
enum WshexStatus wshex_validator_new(const struct WshexSchema *schema,
                                     bool pedantic,
                                     uint64_t step_budget,
                                     struct WshexValidator **out);

/**
 * Destroy a validator handle. Null is a no-op.
 *
 * # Safety
 * `validator` must have come from this library and not be freed twice.
 */
void wshex_validator_free(struct WshexValidator *validator);

/**
 * Check one entity of the graph against one shape of the validator's
 * schema. `entity` is an id like `"Q42"`; `shape` is a label name as
 * written in the schema, without the angle brackets.
 *
 * # Safety
 * `validator` and `graph` must be live handles; `entity` and `shape`
 * must be null or NUL-terminated; `verdict_out` must be null or valid
 * for writes.
 */
enum WshexStatus wshex_validator_check(const struct WshexValidator *validator,
                                       const struct WshexGraph *graph,
                                       const char *entity,
                                       const char *shape,
                                       enum WshexVerdict *verdict_out);

/**
 * Convert a ShEx entity schema written against the wdt:/p:/ps:/pq:
 * reification pattern into WShEx compact syntax.
 *
 * On success `schema_out` receives the converted schema text. If
 * `diagnostics_out` is non-null it receives the conversion notes and
 * rejected constructs, one per line (empty string when there are
 * none); rejections do not fail the call.
 *
 * # Safety
 * `text` must be null or NUL-terminated; `schema_out` must be null or
 * valid for writes; `diagnostics_out` may be null. Returned strings
 * are released with `wshex_string_free`.
 */
enum WshexStatus wshex_convert_entity_schema(const char *text,
                                             char **schema_out,
                                             char **diagnostics_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WSHEX_H */
