#ifndef PERFECT_SAMPLING_H
#define PERFECT_SAMPLING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_INPUT = 2,
  PS_STATUS_DIMENSION_MISMATCH = 3,
  PS_STATUS_UNSUPPORTED = 4,
  PS_STATUS_TIMEOUT = 5,
  PS_STATUS_BUDGET = 6,
  PS_STATUS_INTERNAL = 7,
  PS_STATUS_PANIC = 8,
} PsStatus;

// Opaque move-to-front model.
typedef struct PsMtfModel PsMtfModel;

// Opaque seeded random number generator (ChaCha8).
typedef struct PsRng PsRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ps_last_error(void);

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// New generator seeded from `seed`. Free with [`ps_rng_free`].
struct PsRng *ps_rng_new(uint64_t seed);

// # Safety
// `rng` must come from [`ps_rng_new`] and not be used afterwards.
void ps_rng_free(struct PsRng *rng);

// Builds a move-to-front model from `n` positive, non-increasing weights,
// normalized internally. On success `*out` owns the model.
//
// # Safety
// `weights` must point to `n` doubles; `out` must be writable.
enum PsStatus ps_mtf_new(const double *weights, size_t n, struct PsMtfModel **out);

// # Safety
// `model` must come from [`ps_mtf_new`] and not be used afterwards.
void ps_mtf_free(struct PsMtfModel *model);

// Number of records `n`, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ps_mtf_len(const struct PsMtfModel *model);

// One CFTP run with the monotone coupling. Writes `n` labels to
// `out_perm` and the coalescence window to `out_window` if non-null.
//
// # Safety
// Handles must be live; `out_perm` must hold `n` values.
enum PsStatus ps_mtf_cftp(const struct PsMtfModel *model,
                          struct PsRng *rng,
                          uint64_t max_window,
                          bool doubling,
                          uint32_t *out_perm,
                          uint64_t *out_window);

// One FMMR run from `start` (`n` labels), or from the reversal when
// `start` is null.
//
// # Safety
// Handles must be live; `start` must be null or hold `n` values;
// `out_perm` must hold `n` values.
enum PsStatus ps_mtf_fmmr(const struct PsMtfModel *model,
                          struct PsRng *rng,
                          const uint32_t *start,
                          uint64_t max_window,
                          bool doubling,
                          uint32_t *out_perm,
                          uint64_t *out_window);

// One draw from the incremental exact sampler.
//
// # Safety
// Handles must be live; `out_perm` must hold `n` values.
enum PsStatus ps_mtf_incremental(const struct PsMtfModel *model,
                                 struct PsRng *rng,
                                 uint32_t *out_perm);

// Stationary probability of the permutation `perm` (`n` labels).
//
// # Safety
// `model` must be live; `perm` must hold `n` values; `out` writable.
enum PsStatus ps_mtf_stationary_prob(const struct PsMtfModel *model,
                                     const uint32_t *perm,
                                     double *out);

// Exact mean FMMR windows from the reversal (`out_rev`) and the identity
// (`out_id`). Either output may be null.
//
// # Safety
// `model` must be live.
enum PsStatus ps_mtf_runtime_means(const struct PsMtfModel *model, double *out_rev, double *out_id);

// Exact mean FMMR window from `start` (`n` labels).
//
// # Safety
// `model` must be live; `start` must hold `n` values; `out` writable.
enum PsStatus ps_mtf_fmmr_mean(const struct PsMtfModel *model, const uint32_t *start, double *out);

// One run of CFTP (`use_fmmr == false`) or FMMR from `start` on the
// three-state chain with parameter `epsilon`.
//
// # Safety
// `rng` must be live; `out_state` writable; `out_window` null or writable.
enum PsStatus ps_three_state_sample(double epsilon,
                                    bool use_fmmr,
                                    uint8_t start,
                                    struct PsRng *rng,
                                    uint64_t max_window,
                                    uint8_t *out_state,
                                    uint64_t *out_window);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERFECT_SAMPLING_H */
