/* Copyright 2026 The ionspam Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef IONSPAM_H
#define IONSPAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IonspamStatus {
  IONSPAM_STATUS_OK = 0,
  IONSPAM_STATUS_NULL_POINTER = 1,
  IONSPAM_STATUS_INVALID_ARGUMENT = 2,
  IONSPAM_STATUS_UNKNOWN_SPECIES = 3,
  IONSPAM_STATUS_MODEL_UNDEFINED = 4,
  IONSPAM_STATUS_BUFFER_TOO_SMALL = 5,
  IONSPAM_STATUS_INTERNAL = 6,
} IonspamStatus;

typedef enum IonspamProtocol {
  IONSPAM_PROTOCOL_MAOP = 0,
  IONSPAM_PROTOCOL_NBOP = 1,
  IONSPAM_PROTOCOL_POLARIZATION = 2,
} IonspamProtocol;

typedef enum IonspamReadout {
  IONSPAM_READOUT_BRIGHT = 0,
  IONSPAM_READOUT_DARK = 1,
} IonspamReadout;

// Opaque detection parameters.
typedef struct IonspamDetector IonspamDetector;

// Opaque species parameters.
typedef struct IonspamSpecies IonspamSpecies;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *ionspam_last_error(void);

// Looks up a built-in species by name, e.g. "137Ba+".
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum IonspamStatus ionspam_species_builtin(const char *name, struct IonspamSpecies **out);

// # Safety
// `species` must come from `ionspam_species_builtin` or be NULL.
void ionspam_species_free(struct IonspamSpecies *species);

// Steady-state preparation error from the closed-form rate model.
//
// # Safety
// `species` must be a live handle; `out` must be writable.
enum IonspamStatus ionspam_species_prep_error(const struct IonspamSpecies *species, double *out);

// Preparation error after the preamble and each of `cycles` cycles.
// `out_errors` needs room for `cycles + 1` values; `written` receives the
// count. `flush_cycles` applies to NBOP only. With `ideal`, pulses are
// perfect and no leak is applied.
//
// # Safety
// `species` must be a live handle; `out_errors` must be writable for
// `capacity` values and `written` must be writable.
enum IonspamStatus ionspam_simulate_prep(const struct IonspamSpecies *species,
                                         enum IonspamProtocol protocol,
                                         uint32_t cycles,
                                         uint32_t flush_cycles,
                                         bool ideal,
                                         double *out_errors,
                                         size_t capacity,
                                         size_t *written);

// Wilson score interval for `errors` of `n` at quantile `z`.
//
// # Safety
// `low` and `high` must be writable.
enum IonspamStatus ionspam_wilson_interval(uint64_t errors,
                                           uint64_t n,
                                           double z,
                                           double *low,
                                           double *high);

// Probability that a shelved ion decays within `duration_us`.
double ionspam_decay_probability(double duration_us, double lifetime_s);

// Probability that |0> survives three shelving pulses unshelved.
double ionspam_cabinet_residual(double f1, double f2, double f3);

// Detector with the default ten 35 µs segments and rates.
//
// # Safety
// `out` must be writable.
enum IonspamStatus ionspam_detector_new(struct IonspamDetector **out);

// # Safety
// `detector` must come from `ionspam_detector_new` or be NULL.
void ionspam_detector_free(struct IonspamDetector *detector);

// Sets count rates in counts per µs. Leaves the detector unchanged on error.
//
// # Safety
// `detector` must be a live handle.
enum IonspamStatus ionspam_detector_set_rates(struct IonspamDetector *detector,
                                              double bright_rate_per_us,
                                              double dark_rate_per_us);

// Threshold in use: bright iff total counts exceed it.
//
// # Safety
// `detector` must be a live handle; `out` must be writable.
enum IonspamStatus ionspam_detector_threshold(const struct IonspamDetector *detector,
                                              uint32_t *out);

// Threshold discrimination of `len` segment counts.
//
// # Safety
// `detector` must be a live handle; `counts` must be readable for `len`
// values; `out` must be writable.
enum IonspamStatus ionspam_classify_threshold(const struct IonspamDetector *detector,
                                              const uint32_t *counts,
                                              size_t len,
                                              enum IonspamReadout *out);

// Sequential Bayesian discrimination. `segments_used` and
// `posterior_bright` may be NULL.
//
// # Safety
// `detector` must be a live handle; `counts` must be readable for `len`
// values; `out` must be writable; the optional outputs must be writable
// when non-NULL.
enum IonspamStatus ionspam_classify_bayes(const struct IonspamDetector *detector,
                                          const uint32_t *counts,
                                          size_t len,
                                          enum IonspamReadout *out,
                                          size_t *segments_used,
                                          double *posterior_bright);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONSPAM_H */
