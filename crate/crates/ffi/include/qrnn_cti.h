#ifndef QRNN_CTI_H
#define QRNN_CTI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum QctiStatus {
  QCTI_STATUS_OK = 0,
  QCTI_STATUS_NULL_POINTER = 1,
  QCTI_STATUS_INVALID_ARGUMENT = 2,
  QCTI_STATUS_CONFIG = 10,
  QCTI_STATUS_DATA = 11,
  QCTI_STATUS_NUMERIC = 12,
  QCTI_STATUS_FORMAT = 13,
  QCTI_STATUS_IO = 14,
  QCTI_STATUS_PANIC = 99,
} QctiStatus;

/**
 * Opaque model handle.
 */
typedef struct QctiModel QctiModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qcti_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qcti_last_error_message(void);

/**
 * Build a freshly initialized model. `kind` is one of mlp, cnn, gru, lstm,
 * hybrid_lstm, hybrid_qrnn.
 *
 * # Safety
 * `kind` must be a valid C string and `out` a valid pointer.
 */
enum QctiStatus qcti_model_new(const char *kind,
                               size_t n_features,
                               size_t n_classes,
                               uint64_t seed,
                               struct QctiModel **out);

/**
 * Load a checkpoint file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum QctiStatus qcti_model_load(const char *path, struct QctiModel **out);

/**
 * Write a checkpoint file.
 *
 * # Safety
 * `model` must come from this library and `path` be a valid C string.
 */
enum QctiStatus qcti_model_save(struct QctiModel *model, const char *path);

/**
 * Release a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void qcti_model_free(struct QctiModel *model);

/**
 * Input width of the model, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t qcti_model_n_features(const struct QctiModel *model);

/**
 * Number of output classes, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t qcti_model_n_classes(const struct QctiModel *model);

/**
 * Number of trainable scalars, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t qcti_model_param_count(const struct QctiModel *model);

/**
 * Class probabilities for `rows` samples. `out` receives `rows * n_classes`
 * values; `out_len` is its capacity.
 *
 * # Safety
 * `x` must hold `rows * n_features` doubles and `out` `out_len` doubles.
 */
enum QctiStatus qcti_model_predict_proba(struct QctiModel *model,
                                         const double *x,
                                         size_t rows,
                                         double *out,
                                         size_t out_len);

/**
 * Predicted class index for `rows` samples into `out[0..rows]`.
 *
 * # Safety
 * `x` must hold `rows * n_features` doubles and `out` `out_len` entries.
 */
enum QctiStatus qcti_model_predict(struct QctiModel *model,
                                   const double *x,
                                   size_t rows,
                                   size_t *out,
                                   size_t out_len);

/**
 * Train on a dataset file written by `preprocess` with Adam.
 *
 * # Safety
 * `model` must come from this library and `dataset_path` be a valid C string.
 */
enum QctiStatus qcti_model_train(struct QctiModel *model,
                                 const char *dataset_path,
                                 size_t epochs,
                                 size_t batch_size,
                                 double learning_rate,
                                 uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRNN_CTI_H */
