#ifndef SLOGETTE_H
#define SLOGETTE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a library call. Failure codes match the command-line exit
 * codes where one exists.
 */
typedef enum SlogStatus {
  SLOG_STATUS_OK = 0,
  SLOG_STATUS_USAGE = 2,
  SLOG_STATUS_IO = 3,
  SLOG_STATUS_PARSE = 4,
  SLOG_STATUS_VALIDATE = 5,
  SLOG_STATUS_STRATIFY = 6,
  SLOG_STATUS_GUARD = 7,
  SLOG_STATUS_RUNTIME = 8,
  SLOG_STATUS_NOT_FOUND = 11,
  /**
   * A required pointer argument was null.
   */
  SLOG_STATUS_NULL_ARGUMENT = 20,
  /**
   * A string argument was not valid UTF-8.
   */
  SLOG_STATUS_INVALID_UTF8 = 21,
  /**
   * The library panicked.
   */
  SLOG_STATUS_PANIC = 22,
} SlogStatus;

/**
 * Opaque handle to a finished database.
 */
typedef struct SlogDatabase SlogDatabase;

/**
 * Evaluation settings. Zero in a limit field means unlimited.
 */
typedef struct SlogConfig {
  uint32_t workers;
  /**
   * Zero picks the default.
   */
  uint32_t buckets;
  uint32_t subbuckets;
  uint64_t max_iterations;
  uint32_t max_height;
  /**
   * Record derivation edges, needed by `slog_why`.
   */
  bool why;
  /**
   * Record column origins in `prov_<rel>` relations.
   */
  bool where_provenance;
} SlogConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Settings used when `slog_run` gets a null config: one worker, default
 * buckets, no limits, no provenance.
 */
struct SlogConfig slog_config_default(void);

/**
 * Evaluates `program` over `facts` (ground facts in program syntax, or
 * null) and stores a new database in `*out`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `config` must be null
 * or valid; `out` must be writable.
 */
enum SlogStatus slog_run(const char *program,
                         const char *facts,
                         const struct SlogConfig *config,
                         struct SlogDatabase **out);

/**
 * Releases a database. Null is ignored.
 *
 * # Safety
 * `db` must be null or a pointer from `slog_run` not yet freed.
 */
void slog_database_free(struct SlogDatabase *db);

/**
 * Facts of `relation`, deep-printed, sorted, one per line.
 *
 * # Safety
 * `db` must be a live database; `relation` NUL-terminated; `out` writable.
 */
enum SlogStatus slog_relation_dump(const struct SlogDatabase *db, const char *relation, char **out);

/**
 * Number of facts in `relation`, or in the whole database when
 * `relation` is null.
 *
 * # Safety
 * `db` must be a live database; `relation` null or NUL-terminated; `out`
 * writable.
 */
enum SlogStatus slog_fact_count(const struct SlogDatabase *db, const char *relation, uint64_t *out);

/**
 * Whether the ground fact `fact` is stored; its id goes to `*id` when
 * `id` is not null.
 *
 * # Safety
 * `db` must be a live database; `fact` NUL-terminated; `found` writable;
 * `id` null or writable.
 */
enum SlogStatus slog_contains(const struct SlogDatabase *db,
                              const char *fact,
                              bool *found,
                              uint64_t *id);

/**
 * Input facts `fact` depends on, sorted, one per line. The database must
 * come from a run with `why` set.
 *
 * # Safety
 * `db` must be a live database; `fact` NUL-terminated; `out` writable.
 */
enum SlogStatus slog_why(const struct SlogDatabase *db, const char *fact, char **out);

/**
 * Deep print of the fact with intern id `id`.
 *
 * # Safety
 * `db` must be a live database; `out` writable.
 */
enum SlogStatus slog_deep_print(const struct SlogDatabase *db, uint64_t id, char **out);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library on this thread; owned by the library.
 */
const char *slog_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void slog_string_free(char *s);

/**
 * Builds an intern id from relation, bucket, and counter.
 */
uint64_t slog_pack_id(uint16_t relation, uint16_t bucket, uint32_t counter);

/**
 * Splits an intern id. Null output pointers are skipped.
 *
 * # Safety
 * Each output pointer must be null or writable.
 */
void slog_unpack_id(uint64_t id, uint16_t *relation, uint16_t *bucket, uint32_t *counter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOGETTE_H */
