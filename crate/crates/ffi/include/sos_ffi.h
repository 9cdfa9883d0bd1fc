/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SOS_FFI_H
#define SOS_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SosStatus {
  SOS_STATUS_OK = 0,
  // A required pointer was null.
  SOS_STATUS_NULL_POINTER = 1,
  // Bad argument: index out of range, wrong length, non-finite value.
  SOS_STATUS_INVALID_INPUT = 2,
  // Malformed energy or model text.
  SOS_STATUS_PARSE = 3,
  // The energy has a clique that is not submodular.
  SOS_STATUS_NOT_SUBMODULAR = 4,
  // Too many variables for exhaustive search.
  SOS_STATUS_TOO_LARGE = 5,
  // File could not be read.
  SOS_STATUS_IO = 6,
  // Output buffer has the wrong size.
  SOS_STATUS_BUFFER = 7,
  // The model cannot do what was asked, e.g. predict with a multi-label model.
  SOS_STATUS_UNSUPPORTED = 8,
  SOS_STATUS_INTERNAL = 9,
  // A Rust panic was caught at the boundary.
  SOS_STATUS_PANIC = 10,
} SosStatus;

typedef enum SosTask {
  SOS_TASK_DENOISE = 0,
  SOS_TASK_SEGMENT = 1,
  SOS_TASK_MULTILABEL_DEMO = 2,
} SosTask;

// Opaque binary energy.
typedef struct SosEnergy SosEnergy;

// Opaque trained model.
typedef struct SosModel SosModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into this library on the same thread.
const char *sos_last_error(void);

// Library version as a static NUL-terminated string.
const char *sos_version(void);

// Creates an energy over `num_vars` variables with zero unaries.
//
// # Safety
// `out` must be valid for a pointer write.
enum SosStatus sos_energy_new(size_t num_vars, struct SosEnergy **out);

// Parses the text energy format.
//
// # Safety
// `text` must be a NUL-terminated string and `out` valid for a pointer write.
enum SosStatus sos_energy_parse(const char *text, struct SosEnergy **out);

// Releases an energy. Null is ignored.
//
// # Safety
// `energy` must come from this library and not be used afterwards.
void sos_energy_free(struct SosEnergy *energy);

// # Safety
// `energy` must be a live handle and `out` valid for a write.
enum SosStatus sos_energy_num_vars(const struct SosEnergy *energy, size_t *out);

// Sets the unary costs of `var` for labels 0 and 1.
//
// # Safety
// `energy` must be a live handle.
enum SosStatus sos_energy_set_unary(struct SosEnergy *energy,
                                    size_t var,
                                    double cost0,
                                    double cost1);

// Adds a clique over `k` distinct `members` with a `2^k`-entry table. Bit
// `i` of a table index is the label of `members[i]`. The clique index is
// written to `out_id` unless it is null.
//
// # Safety
// `members` must hold `k` entries, `table` `table_len` entries.
enum SosStatus sos_energy_add_clique(struct SosEnergy *energy,
                                     const size_t *members,
                                     size_t k,
                                     const double *table,
                                     size_t table_len,
                                     size_t *out_id);

// Energy of a labeling of `n` variables.
//
// # Safety
// `labels` must hold `n` bytes and `out_value` be valid for a write.
enum SosStatus sos_energy_evaluate(const struct SosEnergy *energy,
                                   const uint8_t *labels,
                                   size_t n,
                                   double *out_value);

// Exact minimum by max-flow. Fails with `NotSubmodular` if any clique
// table is not submodular.
//
// # Safety
// `out_labels` must hold `n` bytes, `n` equal to the number of variables.
enum SosStatus sos_energy_minimize(const struct SosEnergy *energy,
                                   double *out_value,
                                   uint8_t *out_labels,
                                   size_t n);

// Minimum by enumeration, for small energies.
//
// # Safety
// As [`sos_energy_minimize`].
enum SosStatus sos_energy_brute_force(const struct SosEnergy *energy,
                                      double *out_value,
                                      uint8_t *out_labels,
                                      size_t n);

// Loads a model file written by `sos train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for a write.
enum SosStatus sos_model_load(const char *path, struct SosModel **out);

// Parses model text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` valid for a write.
enum SosStatus sos_model_parse(const char *text, struct SosModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void sos_model_free(struct SosModel *model);

// # Safety
// `model` must be a live handle and `out` valid for a write.
enum SosStatus sos_model_task(const struct SosModel *model, enum SosTask *out);

// Number of weights.
//
// # Safety
// `model` must be a live handle and `out` valid for a write.
enum SosStatus sos_model_dim(const struct SosModel *model, size_t *out);

// Copies the weights into `out`, which must hold exactly `len` =
// [`sos_model_dim`] values.
//
// # Safety
// `out` must be valid for `len` writes.
enum SosStatus sos_model_weights(const struct SosModel *model, double *out, size_t len);

// Writes the 64-digit hex schema hash and a NUL into `out` (65 bytes).
//
// # Safety
// `out` must be valid for `len` writes.
enum SosStatus sos_model_schema_hash(const struct SosModel *model, char *out, size_t len);

// Predicts a binary mask for one image.
//
// `pixels` is row-major with `channels` (1 or 3) interleaved values in
// `[0, 1]`. `scribbles` holds one byte per pixel: 0 background, 1
// foreground, 255 none; segmentation models require it, denoising models
// ignore it and accept null. `out_mask` receives `width * height` bytes.
//
// # Safety
// Buffers must hold the sizes stated above.
enum SosStatus sos_model_predict(const struct SosModel *model,
                                 size_t width,
                                 size_t height,
                                 size_t channels,
                                 const double *pixels,
                                 const uint8_t *scribbles,
                                 uint8_t *out_mask);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOS_FFI_H */
