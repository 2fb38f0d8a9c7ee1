#ifndef FARECAST_H
#define FARECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_ARGUMENT,
  FC_STATUS_INVALID_UTF8,
  FC_STATUS_PANIC,
  FC_STATUS_NON_POSITIVE_PRICE,
  FC_STATUS_QUERY_AFTER_DEPARTURE,
  FC_STATUS_PARSE_ERROR,
  FC_STATUS_DUPLICATE_QUOTE,
  FC_STATUS_MIXED_SERIES,
  FC_STATUS_EMPTY_SERIES,
  FC_STATUS_SINGLE_CLASS_DATASET,
  FC_STATUS_EMPTY_DATASET,
  FC_STATUS_INCOMPATIBLE_SPEC,
  FC_STATUS_FEATURE_MISMATCH,
  FC_STATUS_WRONG_MEMBER_COUNT,
  FC_STATUS_TOO_FEW_SERIES,
  FC_STATUS_ALL_CELLS_FAILED,
  FC_STATUS_INVALID_CONFIG,
  FC_STATUS_MISALIGNED,
  FC_STATUS_IO,
  FC_STATUS_JSON,
  FC_STATUS_CSV,
  /**
   * The normalized performance is undefined for these prices.
   */
  FC_STATUS_UNDEFINED_METRIC,
  FC_STATUS_INDEX_OUT_OF_RANGE,
} FcStatus;

/**
 * A bank of per-route HMM templates.
 */
typedef struct FcHmmBank FcHmmBank;

/**
 * A trained model with its feature layout.
 */
typedef struct FcModel FcModel;

/**
 * Quotes of one route and departure date, filled one query date at a time.
 */
typedef struct FcSeries FcSeries;

/**
 * A purchase decision for one series.
 */
typedef struct FcDecision {
  /**
   * Position of the bought quote in query-date order.
   */
  size_t index;
  double paid_price;
  /**
   * True when no buy signal fired and the fallback rule chose the quote.
   */
  bool forced;
} FcDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *fc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *fc_last_error(void);

/**
 * Starts an empty series.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_series_new(const char *route_id,
                            const char *departure_date,
                            struct FcSeries **out);

/**
 * Appends one quote. Quotes may arrive in any order.
 *
 * # Safety
 * `series` must come from `fc_series_new`; `query_date` must be NUL-terminated.
 */
enum FcStatus fc_series_push(struct FcSeries *series, const char *query_date, double price);

/**
 * Number of quotes pushed so far; 0 for NULL.
 *
 * # Safety
 * `series` must be NULL or come from `fc_series_new`.
 */
size_t fc_series_len(const struct FcSeries *series);

/**
 * # Safety
 * `series` must be NULL or come from `fc_series_new`, and not be freed twice.
 */
void fc_series_free(struct FcSeries *series);

/**
 * Expected price of a uniformly random purchase day.
 *
 * # Safety
 * `series` must come from `fc_series_new`; `out` must be writable.
 */
enum FcStatus fc_random_purchase_price(const struct FcSeries *series, double *out);

/**
 * Lowest price of the series.
 *
 * # Safety
 * `series` must come from `fc_series_new`; `out` must be writable.
 */
enum FcStatus fc_optimal_price(const struct FcSeries *series, double *out);

/**
 * Normalized performance in percent from route-level mean prices.
 * Returns `FC_STATUS_UNDEFINED_METRIC` for a constant-price route whose
 * predicted price misses the optimum.
 *
 * # Safety
 * `out` must be writable.
 */
enum FcStatus fc_normalized_performance(double random,
                                        double optimal,
                                        double predicted,
                                        double *out);

/**
 * Loads a model bundle written by `farecast train --save-model`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_model_load(const char *path, struct FcModel **out);

/**
 * # Safety
 * `model` must be NULL or come from `fc_model_load`, and not be freed twice.
 */
void fc_model_free(struct FcModel *model);

/**
 * Feature columns the model expects; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from `fc_model_load`.
 */
size_t fc_model_n_features(const struct FcModel *model);

/**
 * Predicts `rows` row-major feature rows. Classifiers write 0/1 labels,
 * regressors the predicted minimum price.
 *
 * # Safety
 * `features` must hold `rows * cols` values and `out` room for `rows`.
 */
enum FcStatus fc_model_predict(const struct FcModel *model,
                               const double *features,
                               size_t rows,
                               size_t cols,
                               double *out);

/**
 * Runs the model over a series of a training route and applies the
 * purchase policy.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FcStatus fc_model_decide(const struct FcModel *model,
                              const struct FcSeries *series,
                              struct FcDecision *out);

/**
 * Loads a template directory written by `farecast train --save-bank`.
 *
 * # Safety
 * `dir` must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_hmm_bank_load(const char *dir, struct FcHmmBank **out);

/**
 * # Safety
 * `bank` must be NULL or come from `fc_hmm_bank_load`, and not be freed twice.
 */
void fc_hmm_bank_free(struct FcHmmBank *bank);

/**
 * Number of templates; 0 for NULL.
 *
 * # Safety
 * `bank` must be NULL or come from `fc_hmm_bank_load`.
 */
size_t fc_hmm_bank_len(const struct FcHmmBank *bank);

/**
 * Forward log-likelihood of `obs` under one template. Observations are
 * prices divided by the template's price scale.
 *
 * # Safety
 * `obs` must hold `len` values; `out` must be writable.
 */
enum FcStatus fc_hmm_loglik(const struct FcHmmBank *bank,
                            size_t template_,
                            const double *obs,
                            size_t len,
                            double *out);

/**
 * Index of the template most likely to have produced `obs`.
 *
 * # Safety
 * `obs` must hold `len` values; `out` must be writable.
 */
enum FcStatus fc_hmm_classify(const struct FcHmmBank *bank,
                              const double *obs,
                              size_t len,
                              size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FARECAST_H */
