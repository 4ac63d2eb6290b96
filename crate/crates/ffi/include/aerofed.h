#ifndef AEROFED_H
#define AEROFED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AerofedStatus {
  AEROFED_STATUS_OK = 0,
  AEROFED_STATUS_NULL_POINTER = 1,
  AEROFED_STATUS_INVALID_UTF8 = 2,
  AEROFED_STATUS_CONFIG = 3,
  AEROFED_STATUS_SHAPE = 4,
  AEROFED_STATUS_NUMERIC = 5,
  AEROFED_STATUS_FORMAT = 6,
  AEROFED_STATUS_IO = 7,
  AEROFED_STATUS_BUFFER_TOO_SMALL = 8,
  AEROFED_STATUS_PANIC = 9,
} AerofedStatus;

/**
 * Experiment configuration handle.
 */
typedef struct AerofedConfig AerofedConfig;

/**
 * A loaded GAN checkpoint plus its scorer settings and threshold.
 */
typedef struct AerofedDetector AerofedDetector;

/**
 * Detection metrics with anomalous as the positive class.
 */
typedef struct AerofedMetrics {
  double precision;
  double recall;
  double accuracy;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_count;
  uint64_t tn;
} AerofedMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *aerofed_last_error(void);

/**
 * Creates a configuration holding the defaults.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AerofedStatus aerofed_config_new(struct AerofedConfig **out);

/**
 * Reads a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as for [`aerofed_config_new`].
 */
enum AerofedStatus aerofed_config_load(const char *path, struct AerofedConfig **out);

/**
 * Sets one dotted key, e.g. `gan.K` or `run.method`.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum AerofedStatus aerofed_config_set(struct AerofedConfig *cfg,
                                      const char *key,
                                      const char *value);

/**
 * Copies the value of `key` into `buf` including the terminating NUL.
 * `needed` (optional) receives the required buffer size; a short buffer
 * yields `AEROFED_STATUS_BUFFER_TOO_SMALL` and leaves `buf` untouched.
 *
 * # Safety
 * `cfg` must come from this library; `buf` must hold `buf_len` bytes.
 */
enum AerofedStatus aerofed_config_get(const struct AerofedConfig *cfg,
                                      const char *key,
                                      char *buf,
                                      size_t buf_len,
                                      size_t *needed);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void aerofed_config_free(struct AerofedConfig *cfg);

/**
 * Runs one experiment into `out_dir` and reports the final detection
 * metrics. `metrics` may be null.
 *
 * # Safety
 * `cfg` must come from this library; `out_dir` must be NUL-terminated.
 */
enum AerofedStatus aerofed_run(const struct AerofedConfig *cfg,
                               const char *out_dir,
                               struct AerofedMetrics *metrics);

/**
 * Precision, recall, accuracy and F1 from 0/1 labels and predictions
 * (non-zero = anomalous).
 *
 * # Safety
 * `labels` and `predictions` must each hold `len` bytes; `out` must be writable.
 */
enum AerofedStatus aerofed_compute_metrics(const uint8_t *labels,
                                           const uint8_t *predictions,
                                           size_t len,
                                           struct AerofedMetrics *out);

/**
 * Shard-size-weighted mean of `n_members` parameter vectors of length
 * `len`, stored row after row in `params`. Members with shard size 0 are
 * ignored; if every size is 0 the call fails with `AEROFED_STATUS_CONFIG`.
 *
 * # Safety
 * `params` must hold `n_members * len` values, `shard_sizes` `n_members`
 * values, and `out` room for `len` values.
 */
enum AerofedStatus aerofed_aggregate(const double *params,
                                     const uint64_t *shard_sizes,
                                     size_t n_members,
                                     size_t len,
                                     double *out);

/**
 * Loads `<dir>/<stem>.{gen.bin,disc.bin,sidecar}` as written by a run,
 * e.g. stem `final.global` under a run's `checkpoints/`.
 *
 * # Safety
 * `dir` and `stem` must be NUL-terminated; `out` must be writable.
 */
enum AerofedStatus aerofed_detector_load(const char *dir,
                                         const char *stem,
                                         struct AerofedDetector **out);

/**
 * # Safety
 * `det` must come from this library and not be used afterwards. Null is ignored.
 */
void aerofed_detector_free(struct AerofedDetector *det);

/**
 * Number of features each row must have; 0 for a null handle.
 *
 * # Safety
 * `det` must be null or come from this library.
 */
size_t aerofed_detector_features(const struct AerofedDetector *det);

/**
 * Calibrated threshold stored with the checkpoint; NaN for a null handle.
 *
 * # Safety
 * `det` must be null or come from this library.
 */
double aerofed_detector_threshold(const struct AerofedDetector *det);

/**
 * Anomaly score for each of `n_rows` normalized rows (higher = more anomalous).
 *
 * # Safety
 * `rows` must hold `n_rows * n_features` values and `scores` `n_rows`.
 */
enum AerofedStatus aerofed_detector_score(const struct AerofedDetector *det,
                                          const double *rows,
                                          size_t n_rows,
                                          size_t n_features,
                                          double *scores);

/**
 * Writes 1 for rows scoring strictly above the stored threshold, else 0.
 *
 * # Safety
 * As for [`aerofed_detector_score`], with `flags` holding `n_rows` bytes.
 */
enum AerofedStatus aerofed_detector_classify(const struct AerofedDetector *det,
                                             const double *rows,
                                             size_t n_rows,
                                             size_t n_features,
                                             uint8_t *flags);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aerofed_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AEROFED_H */
