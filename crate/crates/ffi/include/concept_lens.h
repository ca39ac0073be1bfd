#ifndef CONCEPT_LENS_H
#define CONCEPT_LENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_POINTER = 1,
  CL_STATUS_INVALID_UTF8 = 2,
  CL_STATUS_IO = 3,
  CL_STATUS_PARSE = 4,
  CL_STATUS_DIMENSION_MISMATCH = 5,
  CL_STATUS_CONCEPT_MISMATCH = 6,
  CL_STATUS_UNDEFINED_CORRELATION = 7,
  CL_STATUS_INVALID_ARGUMENT = 8,
  CL_STATUS_PANIC = 99,
} ClStatus;

// Opaque interpretable or hybrid model.
typedef struct ClModel ClModel;

// Opaque concept subspace (a loaded CAV store).
typedef struct ClSubspace ClSubspace;

// The three parts of a prediction. For interpretable-only models
// `residual_term` is 0 and `hybrid == interpretable`.
typedef struct ClPrediction {
  double interpretable;
  double residual_term;
  double hybrid;
} ClPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL after a
// successful call. The pointer stays valid until the next call into this
// library from the same thread.
const char *cl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *cl_version(void);

// Loads a CAV store written by `concept-lens learn-cavs`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum ClStatus cl_subspace_load(const char *path, struct ClSubspace **out);

// Releases a subspace. NULL is ignored.
//
// # Safety
// `subspace` must come from [`cl_subspace_load`] and not be used again.
void cl_subspace_free(struct ClSubspace *subspace);

// Embedding dimension, or 0 for NULL.
//
// # Safety
// `subspace` must be NULL or a live handle.
uintptr_t cl_subspace_dim(const struct ClSubspace *subspace);

// Number of concepts, or 0 for NULL.
//
// # Safety
// `subspace` must be NULL or a live handle.
uintptr_t cl_subspace_len(const struct ClSubspace *subspace);

// Name of concept `index`, owned by the handle; NULL when out of range.
//
// # Safety
// `subspace` must be NULL or a live handle.
const char *cl_subspace_concept_name(const struct ClSubspace *subspace, uintptr_t index);

// Projects one embedding of `len` floats onto every concept axis, writing
// `cl_subspace_len` values to `out`.
//
// # Safety
// `embedding` must point to `len` floats and `out` to `out_len` doubles.
enum ClStatus cl_project(const struct ClSubspace *subspace,
                         const float *embedding,
                         uintptr_t len,
                         double *out,
                         uintptr_t out_len);

// Loads an interpretable (`fit`) or hybrid (`fit-residual`) model file.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum ClStatus cl_model_load(const char *path, struct ClModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from [`cl_model_load`] and not be used again.
void cl_model_free(struct ClModel *model);

// 1 when the model carries a residual corrector, else 0.
//
// # Safety
// `model` must be NULL or a live handle.
int32_t cl_model_is_hybrid(const struct ClModel *model);

// Bias of the interpretable part (NaN for NULL).
//
// # Safety
// `model` must be NULL or a live handle.
double cl_model_bias(const struct ClModel *model);

// Copies the concept weights into `out`, which must hold exactly as many
// values as the model has concepts.
//
// # Safety
// `out` must point to `out_len` doubles.
enum ClStatus cl_model_weights(const struct ClModel *model, double *out, uintptr_t out_len);

// Scores one embedding. The subspace may list more concepts than the model;
// the model's concepts are looked up by name.
//
// # Safety
// `embedding` must point to `len` floats and `out` must be valid.
enum ClStatus cl_model_predict(const struct ClModel *model,
                               const struct ClSubspace *subspace,
                               const float *embedding,
                               uintptr_t len,
                               struct ClPrediction *out);

// Spearman rank correlation of two arrays of `n` doubles.
//
// # Safety
// `truth` and `pred` must point to `n` doubles; `out` must be valid.
enum ClStatus cl_srcc(const double *truth, const double *pred, uintptr_t n, double *out);

// Pearson linear correlation of two arrays of `n` doubles.
//
// # Safety
// `truth` and `pred` must point to `n` doubles; `out` must be valid.
enum ClStatus cl_plcc(const double *truth, const double *pred, uintptr_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONCEPT_LENS_H */
