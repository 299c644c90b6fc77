/* C interface for the GRU-NTM traffic classifier. */

#ifndef GNTM_H
#define GNTM_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum GntmStatus {
  GNTM_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GNTM_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  GNTM_INVALID_UTF8 = 2,
  /**
   * File could not be read.
   */
  GNTM_IO_ERROR = 3,
  /**
   * File exists but is not a valid checkpoint.
   */
  GNTM_FORMAT_ERROR = 4,
  /**
   * Buffer length does not match the model's dimensions.
   */
  GNTM_SHAPE_ERROR = 5,
  /**
   * Any other failure; details via gntm_last_error().
   */
  GNTM_RUNTIME_ERROR = 6,
  /**
   * Detector warm-up: fewer records than the window size so far.
   */
  GNTM_NEED_MORE_DATA = 7,
} GntmStatus;

/**
 * Rolling-window detector bound to a model.
 */
typedef struct GntmDetector GntmDetector;

/**
 * A loaded checkpoint: weights plus normalization statistics.
 */
typedef struct GntmModel GntmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *gntm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gntm_version(void);

/**
 * Loads a checkpoint file written by the trainer. On success `*out`
 * receives a handle that must be released with gntm_model_free().
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GntmStatus gntm_model_load(const char *path, struct GntmModel **out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a handle from gntm_model_load(), not yet freed.
 */
void gntm_model_free(struct GntmModel *model);

/**
 * Number of input features per record; 0 on null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t gntm_model_features(const struct GntmModel *model);

/**
 * Records per classification window; 0 on null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t gntm_model_window(const struct GntmModel *model);

/**
 * Classifies one raw (unnormalized) window of `window * features` values
 * in row-major record order. Writes 3 class probabilities (Normal, DoS,
 * DDoS) to `probs_out` and the argmax class to `class_out`.
 *
 * # Safety
 * `values` must hold `len` readable doubles; `probs_out` must have room
 * for 3 doubles; `class_out` must be a valid pointer.
 */
enum GntmStatus gntm_model_classify(const struct GntmModel *model,
                                    const double *values,
                                    uintptr_t len,
                                    double *probs_out,
                                    uint32_t *class_out);

/**
 * Name of a class id as a static string, or null when out of range.
 */
const char *gntm_class_name(uint32_t class_);

/**
 * Creates a streaming detector bound to the model's weights. The model
 * handle may be freed independently afterwards.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GntmStatus gntm_detector_new(const struct GntmModel *model, struct GntmDetector **out);

/**
 * Pushes one raw record of `len == features` values. Returns
 * GntmNeedMoreData until the rolling window is full; afterwards every
 * push classifies the window ending at this record.
 *
 * # Safety
 * Pointer arguments as in gntm_model_classify().
 */
enum GntmStatus gntm_detector_push(struct GntmDetector *detector,
                                   const double *record,
                                   uintptr_t len,
                                   double *probs_out,
                                   uint32_t *class_out);

/**
 * Releases a detector handle. Null is a no-op.
 *
 * # Safety
 * `detector` must be a handle from gntm_detector_new(), not yet freed.
 */
void gntm_detector_free(struct GntmDetector *detector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNTM_H */
