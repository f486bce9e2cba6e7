#ifndef MLSCOPE_H
#define MLSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlsStatus {
  MLS_STATUS_OK = 0,
  MLS_STATUS_NULL_POINTER = 1,
  MLS_STATUS_INVALID_UTF8 = 2,
  MLS_STATUS_IO = 3,
  MLS_STATUS_INVALID_TABLE = 4,
  MLS_STATUS_INVALID_EMBEDDINGS = 5,
  MLS_STATUS_MALFORMED_TOKEN = 6,
  MLS_STATUS_INVALID_STATE = 7,
  MLS_STATUS_INVALID_ARGUMENT = 8,
  MLS_STATUS_ANALYSIS = 9,
  MLS_STATUS_PANIC = 99,
} MlsStatus;

/**
 * Opaque embedding matrix.
 */
typedef struct MlsEmbeddings MlsEmbeddings;

/**
 * Opaque metadata table.
 */
typedef struct MlsTable MlsTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mls_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void mls_string_free(char *s);

/**
 * Loads a CSV table. Column kinds come from the `<stem>.schema.json`
 * sidecar when present.
 *
 * # Safety
 * `path` must be a valid string; `out` a valid pointer.
 */
enum MlsStatus mls_table_load(const char *path, struct MlsTable **out);

/**
 * Parses CSV bytes. `hints_json` is NULL or a JSON object mapping column
 * names to kinds, e.g. `{"label":"label","pred":"prediction"}`.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` a valid pointer.
 */
enum MlsStatus mls_table_from_csv(const uint8_t *data,
                                  size_t len,
                                  const char *hints_json,
                                  struct MlsTable **out);

/**
 * # Safety
 * `table` must be NULL or a handle from this library.
 */
size_t mls_table_row_count(const struct MlsTable *table);

/**
 * # Safety
 * `table` must be NULL or a handle from this library, not yet freed.
 */
void mls_table_free(struct MlsTable *table);

/**
 * Loads raw f32 embeddings with their `.meta` sidecar.
 *
 * # Safety
 * `path` must be a valid string; `out` a valid pointer.
 */
enum MlsStatus mls_embeddings_load(const char *path, struct MlsEmbeddings **out);

/**
 * Copies an `n` x `d` row-major matrix.
 *
 * # Safety
 * `values` must point to `n * d` readable floats; `out` a valid pointer.
 */
enum MlsStatus mls_embeddings_from_f32(const float *values,
                                       size_t n,
                                       size_t d,
                                       struct MlsEmbeddings **out);

/**
 * # Safety
 * `emb` must be NULL or a handle from this library, not yet freed.
 */
void mls_embeddings_free(struct MlsEmbeddings *emb);

/**
 * Derived view JSON for a state token (NULL for the default state). Same
 * bytes as the service's `/api/view`.
 *
 * # Safety
 * `table` must be a live handle; `token` NULL or a valid string; `out` valid.
 */
enum MlsStatus mls_view_json(const struct MlsTable *table, const char *token, char **out);

/**
 * Confusion matrix JSON `{classes, counts, total}` over the whole table.
 *
 * # Safety
 * `table` must be a live handle; `label`/`pred` valid strings; `out` valid.
 */
enum MlsStatus mls_confusion_json(const struct MlsTable *table,
                                  const char *label,
                                  const char *pred,
                                  char **out);

/**
 * Duplicate groups JSON `{groups, params}`; rows of `emb` align with the
 * table's rows.
 *
 * # Safety
 * `table` and `emb` must be live handles; `out` valid.
 */
enum MlsStatus mls_duplicates_json(const struct MlsTable *table,
                                   const struct MlsEmbeddings *emb,
                                   size_t k,
                                   double tau,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLSCOPE_H */
