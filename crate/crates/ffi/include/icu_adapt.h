#ifndef ICU_ADAPT_H
#define ICU_ADAPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum IcuStatus {
  ICU_STATUS_OK = 0,
  ICU_STATUS_NULL_POINTER = 1,
  /**
   * Bad arguments, missing checkpoint file, or configuration.
   */
  ICU_STATUS_USAGE = 2,
  /**
   * Unreadable or malformed checkpoint, or undefined metric.
   */
  ICU_STATUS_DATA = 3,
  ICU_STATUS_INTERNAL = 4,
  ICU_STATUS_PANIC = 5,
} IcuStatus;

/**
 * A loaded checkpoint.
 */
typedef struct IcuModel IcuModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *icu_last_error(void);

/**
 * Loads a checkpoint file and stores a new handle in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IcuStatus icu_model_load(const char *path, struct IcuModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`icu_model_load`] and not be used afterwards.
 */
void icu_model_free(struct IcuModel *model);

/**
 * Number of input channels the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t icu_model_n_features(const struct IcuModel *model);

/**
 * Hourly risks for a preprocessed row-major `n_hours x n_features` matrix
 * (filled and scaled to [0, 1]). Writes `n_hours` values to `out_risk`.
 *
 * # Safety
 * `values` must hold `n_hours * n_features` doubles and `out_risk` room for
 * `n_hours`.
 */
enum IcuStatus icu_model_predict(const struct IcuModel *model,
                                 const double *values,
                                 size_t n_hours,
                                 size_t n_features,
                                 double *out_risk);

/**
 * Like [`icu_model_predict`] but on raw hourly measurements, NaN marking a
 * missing cell. Filling and scaling use the checkpoint's statistics.
 *
 * # Safety
 * Same as [`icu_model_predict`].
 */
enum IcuStatus icu_model_predict_raw(const struct IcuModel *model,
                                     const double *values,
                                     size_t n_hours,
                                     size_t n_features,
                                     double *out_risk);

/**
 * Area under the ROC curve of `scores` against `labels` (nonzero = positive).
 *
 * # Safety
 * `scores` and `labels` must each hold `n` elements; `out` must be valid.
 */
enum IcuStatus icu_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICU_ADAPT_H */
