#ifndef STELLAR_FDA_H
#define STELLAR_FDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfdaStatus {
  SFDA_STATUS_OK = 0,
  SFDA_STATUS_NULL_POINTER = 1,
  /*
   Bad arguments or malformed input data.
   */
  SFDA_STATUS_INVALID_INPUT = 2,
  /*
   Rank deficiency, non-convergence and other numerical failures.
   */
  SFDA_STATUS_NUMERIC = 3,
  SFDA_STATUS_IO = 4,
  SFDA_STATUS_PANIC = 5,
} SfdaStatus;

typedef enum SfdaBasis {
  SFDA_BASIS_FOURIER = 0,
  SFDA_BASIS_BSPLINE = 1,
} SfdaBasis;

typedef enum SfdaMethod {
  SFDA_METHOD_OLS = 0,
  SFDA_METHOD_ROBUST = 1,
  SFDA_METHOD_RIDGE = 2,
  SFDA_METHOD_LASSO = 3,
} SfdaMethod;

typedef enum SfdaTargetMode {
  SFDA_TARGET_MODE_BRUT = 0,
  SFDA_TARGET_MODE_NORM = 1,
} SfdaTargetMode;

/*
 Loaded or generated spectra with their two targets.
 */
typedef struct SfdaDataset SfdaDataset;

/*
 Fitted linear model with its basis and window layout.
 */
typedef struct SfdaModel SfdaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a successful call.
 The pointer stays valid until the next call on the same thread.
 */
const char *sfda_last_error(void);

/*
 Frees a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void sfda_string_free(char *s);

/*
 Loads a manifest (`model_id,file,t_star,log_rt`) and its spectra over the default
 line windows. `spectra_dir` may be null, meaning the manifest's directory.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum SfdaStatus sfda_dataset_load(const char *manifest,
                                  const char *spectra_dir,
                                  struct SfdaDataset **out);

/*
 Generates a synthetic grid with a planted linear model over the first
 `window_count` default windows (0 means all).

 # Safety
 `out` must be writable.
 */
enum SfdaStatus sfda_dataset_synth(size_t n,
                                   size_t true_p,
                                   size_t window_count,
                                   uint64_t seed,
                                   struct SfdaDataset **out);

/*
 Number of spectra; 0 for null.

 # Safety
 `data` must be null or a live dataset handle.
 */
size_t sfda_dataset_len(const struct SfdaDataset *data);

/*
 Copies the targets row-major (`t_star`, `log_rt` per spectrum) into `out`, which
 must hold `2 * len` values.

 # Safety
 `data` must be a live handle and `out` must point to `out_len` doubles.
 */
enum SfdaStatus sfda_dataset_targets(const struct SfdaDataset *data, double *out, size_t out_len);

/*
 # Safety
 `data` must be null or a handle not yet freed.
 */
void sfda_dataset_free(struct SfdaDataset *data);

/*
 Fits one model on basis size `p`. For ridge and lasso a finite `lambda > 0` is used
 as is; otherwise λ is chosen by cross-validation over the default grid with `seed`.

 # Safety
 `data` must be a live handle; `out` must be writable.
 */
enum SfdaStatus sfda_fit(const struct SfdaDataset *data,
                         enum SfdaBasis basis,
                         size_t p,
                         enum SfdaMethod method,
                         enum SfdaTargetMode mode,
                         double lambda,
                         uint64_t seed,
                         struct SfdaModel **out);

/*
 Predicts every spectrum of `data`, row-major into `out` (`2 * len` values). The
 dataset must use the model's windows.

 # Safety
 Handles must be live and `out` must point to `out_len` doubles.
 */
enum SfdaStatus sfda_predict(const struct SfdaModel *model,
                             const struct SfdaDataset *data,
                             double *out,
                             size_t out_len);

/*
 Predicts one spectrum given as parallel wavelength and flux arrays.

 # Safety
 `wavelengths` and `flux` must point to `len` doubles, `out` to 2 doubles.
 */
enum SfdaStatus sfda_predict_spectrum(const struct SfdaModel *model,
                                      const double *wavelengths,
                                      const double *flux,
                                      size_t len,
                                      double *out);

/*
 Serializes a model to JSON; free the result with [`sfda_string_free`].

 # Safety
 `model` must be live; `out` must be writable.
 */
enum SfdaStatus sfda_model_to_json(const struct SfdaModel *model, char **out);

/*
 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
enum SfdaStatus sfda_model_from_json(const char *json, struct SfdaModel **out);

/*
 # Safety
 `model` must be live; `path` must be NUL-terminated.
 */
enum SfdaStatus sfda_model_save(const struct SfdaModel *model, const char *path);

/*
 # Safety
 `path` must be NUL-terminated; `out` must be writable.
 */
enum SfdaStatus sfda_model_load(const char *path, struct SfdaModel **out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void sfda_model_free(struct SfdaModel *model);

/*
 Rotated five-fold evaluation with validated basis size; writes the report as JSON.
 Free the result with [`sfda_string_free`].

 # Safety
 `data` must be live; `out` must be writable.
 */
enum SfdaStatus sfda_evaluate_json(const struct SfdaDataset *data,
                                   enum SfdaBasis basis,
                                   enum SfdaMethod method,
                                   enum SfdaTargetMode mode,
                                   uint64_t seed,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STELLAR_FDA_H */
