#ifndef FINKEY_H
#define FINKEY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define FINKEY_CLAMP_PROBABILITY_CAP (1 << 0)

#define FINKEY_CLAMP_PHASE_ERRORS_CAPPED (1 << 1)

#define FINKEY_CLAMP_PHASE_ERROR_RATE_HALF (1 << 2)

#define FINKEY_CLAMP_BIT_ERROR_RATE_HALF (1 << 3)

#define FINKEY_CLAMP_KEY_FLOOR (1 << 4)

#define FINKEY_CLAMP_DECOY_FLOOR (1 << 5)

#define FINKEY_CLAMP_DECOY_CAP (1 << 6)

#define FINKEY_CLAMP_CORRECT_CAPPED (1 << 7)

#define FINKEY_CLAMP_NO_EVENTS (1 << 8)

typedef enum FinkeyBound {
  FINKEY_BOUND_OBSERVATION_UPPER = 0,
  FINKEY_BOUND_OBSERVATION_LOWER = 1,
  FINKEY_BOUND_EXPECTATION_UPPER = 2,
  FINKEY_BOUND_EXPECTATION_LOWER = 3,
} FinkeyBound;

// Analysis mode: finite key with the exact or bounded de Finetti
// penalty, or the infinite-key limit.
typedef enum FinkeyMode {
  FINKEY_MODE_EXACT = 0,
  FINKEY_MODE_PAPER_BOUND = 1,
  FINKEY_MODE_ASYMPTOTIC = 2,
} FinkeyMode;

typedef enum FinkeyProtocol {
  FINKEY_PROTOCOL_SCS = 0,
  FINKEY_PROTOCOL_NPP = 1,
} FinkeyProtocol;

// Outcome of a fallible call.
typedef enum FinkeyStatus {
  FINKEY_STATUS_OK = 0,
  FINKEY_STATUS_NULL_POINTER = 1,
  // An argument is outside its mathematical domain.
  FINKEY_STATUS_DOMAIN = 2,
  FINKEY_STATUS_CONFIG = 3,
  FINKEY_STATUS_DEGENERATE_CHANNEL = 4,
  FINKEY_STATUS_INFINITE_INTENSITY = 5,
  FINKEY_STATUS_BUDGET_UNACHIEVABLE = 6,
  FINKEY_STATUS_INVALID_ARGUMENT = 7,
  FINKEY_STATUS_IO = 8,
  FINKEY_STATUS_PANIC = 9,
} FinkeyStatus;

// Evaluator bound to one device, pulse count, distance and mode.
typedef struct FinkeyEvaluator FinkeyEvaluator;

// One key-rate evaluation.
typedef struct FinkeyResult FinkeyResult;

// Optimized rows of a sweep, in distance order then pulse-count order,
// with the asymptotic row last at each distance when requested.
typedef struct FinkeySweep FinkeySweep;

// Device and channel description.
typedef struct FinkeyDevice {
  // Dark-count probability per detector per pulse.
  double p_d;
  // Misalignment error.
  double e_d;
  double eta_d;
  // Error-correction inefficiency.
  double f;
  // Fibre loss in dB/km.
  double alpha_f;
  double eps_tot;
  uint64_t n_pulses;
  double distance_km;
} FinkeyDevice;

// Protocol parameters. `nu` and `p0` are read for NPP only; `c0` for SCS
// only, where NaN selects the default.
typedef struct FinkeyParams {
  double mu;
  double nu;
  double p;
  double p0;
  double c0;
} FinkeyParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *finkey_last_error(void);

// Library version as a static NUL-terminated string.
const char *finkey_version(void);

// Reference device (dark counts 1e-9, misalignment 4%, detector efficiency
// 30%, f = 1.1, 0.2 dB/km, eps_tot = 1e-10).
struct FinkeyDevice finkey_device_default(uint64_t n_pulses, double distance_km);

// # Safety
// `device` must point to a valid `FinkeyDevice`; `out` must be writable.
enum FinkeyStatus finkey_evaluator_new(enum FinkeyProtocol proto,
                                       const struct FinkeyDevice *device,
                                       enum FinkeyMode mode,
                                       struct FinkeyEvaluator **out);

// # Safety
// `ev` must come from [`finkey_evaluator_new`] and not be used afterwards.
void finkey_evaluator_free(struct FinkeyEvaluator *ev);

// # Safety
// `ev` and `params` must be valid; `out` must be writable.
enum FinkeyStatus finkey_evaluate(const struct FinkeyEvaluator *ev,
                                  const struct FinkeyParams *params,
                                  struct FinkeyResult **out);

// # Safety
// `r` must come from [`finkey_evaluate`]; results borrowed from a sweep
// are freed with the sweep instead.
void finkey_result_free(struct FinkeyResult *r);

// Secret key bits per pulse. NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double finkey_result_rate(const struct FinkeyResult *r);

// Key length in bits, floored at zero. NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double finkey_result_key_bits(const struct FinkeyResult *r);

// Key length before flooring. NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double finkey_result_raw_bits(const struct FinkeyResult *r);

// Phase-error count bound (SCS) or phase-correct count bound (NPP). NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double finkey_result_estimate(const struct FinkeyResult *r);

// Distance of the evaluated point in km. NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double finkey_result_distance_km(const struct FinkeyResult *r);

// Bitwise OR of the clamps applied. Zero for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
uint16_t finkey_result_clamps(const struct FinkeyResult *r);

// Looks up a named term of the key-length decomposition such as
// `phase_entropy` or `ec_leak`.
//
// # Safety
// `r` must be a live result, `name` a NUL-terminated string and `out`
// writable.
enum FinkeyStatus finkey_result_term(const struct FinkeyResult *r, const char *name, double *out);

// Optimizes every `(distance, pulse count)` cell with the default search
// space, plus an asymptotic row per distance when `asymptotic` is set.
//
// # Safety
// `device` must be valid, the arrays must hold the given number of
// elements and `out` must be writable.
enum FinkeyStatus finkey_sweep(enum FinkeyProtocol proto,
                               const struct FinkeyDevice *device,
                               enum FinkeyMode mode,
                               const double *distances_km,
                               size_t n_distances,
                               const uint64_t *n_pulses,
                               size_t n_counts,
                               bool asymptotic,
                               struct FinkeySweep **out);

// # Safety
// `s` must be null or a live sweep handle.
size_t finkey_sweep_len(const struct FinkeySweep *s);

// Borrowed row `i`, or null when out of range. Do not free it.
//
// # Safety
// `s` must be null or a live sweep handle.
const struct FinkeyResult *finkey_sweep_get(const struct FinkeySweep *s, size_t i);

// Writes the sweep as CSV, same layout as the command-line tool.
//
// # Safety
// `s` must be a live sweep and `path` a NUL-terminated string.
enum FinkeyStatus finkey_sweep_write_csv(const struct FinkeySweep *s, const char *path);

// # Safety
// `s` must come from [`finkey_sweep`] and not be used afterwards.
void finkey_sweep_free(struct FinkeySweep *s);

// Natural log of the de Finetti factor `g(N, x)`.
//
// # Safety
// `out` must be writable.
enum FinkeyStatus finkey_ln_g(uint64_t n, uint64_t x, enum FinkeyMode mode, double *out);

// Chernoff bound of `value` at failure probability `exp(-t)`.
//
// # Safety
// `out` must be writable.
enum FinkeyStatus finkey_chernoff(enum FinkeyBound bound, double value, double t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINKEY_H */
