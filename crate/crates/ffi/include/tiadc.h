#ifndef TIADC_H
#define TIADC_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The non-zero values used by the command-line tool keep
 * the same meaning here.
 */
typedef enum TiadcStatus {
  TIADC_STATUS_OK = 0,
  TIADC_STATUS_IO = 1,
  TIADC_STATUS_INVALID_CONFIG = 2,
  TIADC_STATUS_INFEASIBLE = 3,
  TIADC_STATUS_NULL_POINTER = 4,
  TIADC_STATUS_BUFFER_TOO_SMALL = 5,
  TIADC_STATUS_PANIC = 6,
} TiadcStatus;

typedef enum TiadcScenario {
  TIADC_SCENARIO_IDEAL = 0,
  TIADC_SCENARIO_UNCORRECTED = 1,
  TIADC_SCENARIO_SCRAMBLE = 2,
  TIADC_SCENARIO_SHAPE = 3,
} TiadcScenario;

/**
 * Opaque run configuration.
 */
typedef struct TiadcConfig TiadcConfig;

/**
 * Opaque result of one scenario.
 */
typedef struct TiadcResult TiadcResult;

/**
 * Shaping modulator parameters.
 */
typedef struct TiadcDdsmParams {
  uint32_t order;
  uint32_t levels;
  double step;
  uint32_t input_bits;
  bool dither;
} TiadcDdsmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *tiadc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tiadc_version(void);

/**
 * Built-in default configuration. Never null.
 */
struct TiadcConfig *tiadc_config_default(void);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum TiadcStatus tiadc_config_from_toml(const char *text, struct TiadcConfig **out);

/**
 * # Safety
 * `config` must be null or a handle from this library not yet freed.
 */
void tiadc_config_free(struct TiadcConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum TiadcStatus tiadc_config_set_seed(struct TiadcConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum TiadcStatus tiadc_config_set_samples(struct TiadcConfig *config, size_t samples);

/**
 * SHA-256 of the canonical configuration as 64 hex digits plus NUL.
 * `buf` must hold at least 65 bytes.
 *
 * # Safety
 * `config` must be a live handle and `buf` valid for `len` bytes.
 */
enum TiadcStatus tiadc_config_hash(const struct TiadcConfig *config, char *buf, size_t len);

/**
 * Simulates and measures one scenario.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum TiadcStatus tiadc_run(const struct TiadcConfig *config,
                           enum TiadcScenario scenario,
                           struct TiadcResult **out);

/**
 * # Safety
 * `result` must be null or a handle from this library not yet freed.
 */
void tiadc_result_free(struct TiadcResult *result);

/**
 * Measured SFDR in dB.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum TiadcStatus tiadc_result_sfdr_measured(const struct TiadcResult *result, double *out);

/**
 * Closed-form SFDR in dB; `+INFINITY` when the residual vanishes.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum TiadcStatus tiadc_result_sfdr_predicted(const struct TiadcResult *result, double *out);

/**
 * Number of spectrum bins.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t tiadc_result_spectrum_len(const struct TiadcResult *result);

/**
 * Copies bin frequencies (cycles/sample) and PSD (dB) into caller buffers
 * of `len` elements each. Either buffer may be null to skip it.
 *
 * # Safety
 * `result` must be a live handle; non-null buffers must be valid for `len`
 * elements.
 */
enum TiadcStatus tiadc_result_spectrum(const struct TiadcResult *result,
                                       double *freqs,
                                       double *psd_db,
                                       size_t len);

/**
 * Metrics as a JSON array with one object, owned by the result handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
const char *tiadc_result_metrics_json(const struct TiadcResult *result);

/**
 * Edge probabilities `[p(-1), p(0), p(+1)]` for normalized skew `alpha`
 * and second moment `g_squared`.
 *
 * # Safety
 * `out` must be valid for 3 elements.
 */
enum TiadcStatus tiadc_solve_probabilities(double alpha, double g_squared, double *out);

/**
 * Default shaping modulator parameters.
 */
struct TiadcDdsmParams tiadc_ddsm_default_params(void);

/**
 * Edge offsets for a channel with skew `tau` and edge step `delta`.
 *
 * # Safety
 * `out` must be valid for `len` elements.
 */
enum TiadcStatus tiadc_ddsm_sequence(double tau,
                                     double delta,
                                     struct TiadcDdsmParams params,
                                     uint64_t seed,
                                     uint64_t stream_id,
                                     double *out,
                                     size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIADC_H */
