/* C interface for the batchrl policy-gradient toolkit. */

#ifndef BATCHRL_H
#define BATCHRL_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum brl_status {
  BRL_STATUS_OK = 0,
  /**
   * Bad configuration, malformed file, or dimension mismatch.
   */
  BRL_STATUS_CONFIG_ERROR = 2,
  /**
   * Numerical failure (integration blow-up, NaN objective, ...).
   */
  BRL_STATUS_NUMERIC_ERROR = 3,
  /**
   * A required pointer argument was null.
   */
  BRL_STATUS_NULL_POINTER = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  BRL_STATUS_UTF8_ERROR = 5,
  /**
   * A panic was caught at the boundary.
   */
  BRL_STATUS_PANIC = 6,
} brl_status;

/**
 * Opaque resolved configuration.
 */
typedef struct BrlConfig BrlConfig;

/**
 * Opaque policy: a checkpointed network plus its parameters.
 */
typedef struct BrlPolicy BrlPolicy;

/**
 * Monte-Carlo evaluation statistics.
 */
typedef struct brl_eval_stats {
  double mean;
  double std;
  double p2;
  double p98;
  uint64_t episodes;
} brl_eval_stats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *brl_version(void);

/**
 * Message describing the most recent error on this thread. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *brl_last_error(void);

/**
 * Creates the built-in default configuration (the CS1 pipeline).
 *
 * # Safety
 * `out` must be a valid pointer; the result must be released with
 * [`brl_config_free`].
 */
enum brl_status brl_config_default(struct BrlConfig **out);

/**
 * Parses a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid. The result
 * must be released with [`brl_config_free`].
 */
enum brl_status brl_config_load(const char *path, struct BrlConfig **out);

/**
 * Overrides the master seed of a configuration.
 *
 * # Safety
 * `config` must be a live handle from this library.
 */
enum brl_status brl_config_set_seed(struct BrlConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must come from this library and must not be used afterwards.
 */
void brl_config_free(struct BrlConfig *config);

/**
 * Runs the full offline + transfer + online pipeline, writing a run
 * directory at `out_dir` (which must be absent or empty).
 *
 * # Safety
 * `config` must be a live handle; `out_dir` a NUL-terminated string.
 */
enum brl_status brl_run_pipeline(const struct BrlConfig *config, const char *out_dir);

/**
 * Loads a policy checkpoint written by the pipeline.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid. The result
 * must be released with [`brl_policy_free`].
 */
enum brl_status brl_policy_load(const char *path, struct BrlPolicy **out);

/**
 * # Safety
 * `policy` must come from this library and must not be used afterwards.
 */
void brl_policy_free(struct BrlPolicy *policy);

/**
 * Measured-state dimension the policy expects per step.
 *
 * # Safety
 * `policy` must be a live handle (returns 0 on null).
 */
size_t brl_policy_n_states(const struct BrlPolicy *policy);

/**
 * # Safety
 * `policy` must be a live handle (returns 0 on null).
 */
size_t brl_policy_n_actions(const struct BrlPolicy *policy);

/**
 * Length of the recurrent hidden state the caller must carry between steps
 * (initialize with zeros at the start of every batch).
 *
 * # Safety
 * `policy` must be a live handle (returns 0 on null).
 */
size_t brl_policy_hidden_len(const struct BrlPolicy *policy);

/**
 * One policy evaluation: writes the action mean and standard deviation
 * (each `n_actions` long) and replaces `hidden` with the next recurrent
 * state. `time_fraction` is t/T in [0, 1]. With history depth 1, `state`
 * holds the current measured state and `prev_action` the previously applied
 * control (zeros at t = 0).
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths; `policy` must
 * be a live handle and must not be shared across threads concurrently.
 */
enum brl_status brl_policy_act(struct BrlPolicy *policy,
                               const double *state,
                               size_t n_state,
                               const double *prev_action,
                               size_t n_prev,
                               double *hidden,
                               size_t n_hidden,
                               double time_fraction,
                               double *mean_out,
                               double *std_out);

/**
 * Monte-Carlo evaluation of a loaded policy on the configured plant.
 * `episodes == 0` uses the configuration's evaluation episode count.
 *
 * # Safety
 * `config` and `policy` must be live handles; `out` must be valid.
 */
enum brl_status brl_evaluate(const struct BrlConfig *config,
                             const struct BrlPolicy *policy,
                             uint32_t episodes,
                             struct brl_eval_stats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BATCHRL_H */
