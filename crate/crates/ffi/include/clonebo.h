#ifndef CLONEBO_H
#define CLONEBO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ClbStatus {
  CLB_STATUS_OK = 0,
  CLB_STATUS_NULL_POINTER = 1,
  CLB_STATUS_INVALID_UTF8 = 2,
  CLB_STATUS_CONFIG = 3,
  CLB_STATUS_PARSE = 4,
  CLB_STATUS_INVALID_SEQUENCE = 5,
  CLB_STATUS_LENGTH_MISMATCH = 6,
  CLB_STATUS_INSUFFICIENT_DATA = 7,
  CLB_STATUS_NUMERICAL = 8,
  CLB_STATUS_IO = 9,
  CLB_STATUS_PANIC = 10,
  CLB_STATUS_OTHER = 11,
} ClbStatus;

// A fitness function drawn from the posterior.
typedef struct ClbFitness ClbFitness;

// A clone model.
typedef struct ClbModel ClbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *clb_last_error(void);

// Library version as a static NUL-terminated string.
const char *clb_version(void);

// Loads a model from the JSON text written by `clonebo fit-model`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum ClbStatus clb_model_from_json(const char *json, struct ClbModel **out);

// # Safety
// `model` must come from [`clb_model_from_json`] and not be used afterwards.
void clb_model_free(struct ClbModel *model);

// Number of letters; tokens are `0..size`.
//
// # Safety
// `model` must be a live handle or null (which yields 0).
size_t clb_model_alphabet_size(const struct ClbModel *model);

// `log p(x | x0)` for one new member after the seed.
//
// # Safety
// `model` must be live; `x0` and `x` must hold `x0_len` and `x_len` tokens.
enum ClbStatus clb_model_sequence_logprob(const struct ClbModel *model,
                                          const uint16_t *x0,
                                          size_t x0_len,
                                          const uint16_t *x,
                                          size_t x_len,
                                          double *out);

// Closed-form `log p(Y | F)` (up to a constant) with noise scale
// `sigma_tilde / sqrt(n_cond_max)`.
//
// # Safety
// `f` and `y` must each hold `n` values; `out` must be writable.
enum ClbStatus clb_log_marginal_likelihood(const double *f,
                                           const double *y,
                                           size_t n,
                                           double sigma_tilde,
                                           size_t n_cond_max,
                                           double *out);

// Draws a fitness function from the posterior given measured sequences.
//
// The `n_cond` measured sequences are packed back to back in `cond_tokens`
// with lengths in `cond_lens`; `values` holds their normalized measurements.
//
// # Safety
// All arrays must hold the stated number of elements; `out` must be writable.
enum ClbStatus clb_sample_posterior_fitness(const struct ClbModel *model,
                                            const uint16_t *x0,
                                            size_t x0_len,
                                            const uint16_t *cond_tokens,
                                            const size_t *cond_lens,
                                            const double *values,
                                            size_t n_cond,
                                            size_t particles,
                                            size_t members,
                                            double sigma_tilde,
                                            uint64_t seed,
                                            struct ClbFitness **out);

// Evaluates the sampled fitness at `x`.
//
// # Safety
// `fitness` must be live; `x` must hold `len` tokens; `out` must be writable.
enum ClbStatus clb_fitness_eval(const struct ClbFitness *fitness,
                                const uint16_t *x,
                                size_t len,
                                double *out);

// Number of sampled clone members behind this fitness.
//
// # Safety
// `fitness` must be a live handle or null (which yields 0).
size_t clb_fitness_members(const struct ClbFitness *fitness);

// # Safety
// `fitness` must come from [`clb_sample_posterior_fitness`] and not be used
// afterwards.
void clb_fitness_free(struct ClbFitness *fitness);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLONEBO_H */
