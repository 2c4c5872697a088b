#ifndef TSAGA_H
#define TSAGA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsagaStatus {
  TSAGA_STATUS_OK = 0,
  TSAGA_STATUS_NULL_POINTER = 1,
  TSAGA_STATUS_DIMENSION_MISMATCH = 2,
  TSAGA_STATUS_INVALID_PARAMETER = 3,
  TSAGA_STATUS_NON_FINITE = 4,
  TSAGA_STATUS_IO = 5,
  TSAGA_STATUS_CONFIG = 6,
  TSAGA_STATUS_DIVERGED = 7,
  TSAGA_STATUS_DATA = 8,
  TSAGA_STATUS_PANIC = 9,
} TsagaStatus;

typedef enum TsagaVariant {
  TSAGA_VARIANT_TSA_GA = 0,
  TSAGA_VARIANT_NO_SUPPORT = 1,
  TSAGA_VARIANT_NO_AMPLITUDE = 2,
  TSAGA_VARIANT_MEMORYLESS = 3,
} TsagaVariant;

// Opaque partial-DCT sensing operator.
typedef struct TsagaOperator TsagaOperator;

// Opaque multi-round recovery engine.
typedef struct TsagaTracker TsagaTracker;

// Markov prior parameters, field for field as in the core library.
typedef struct TsagaChainParams {
  double lambda;
  double gamma;
  double p01;
  double p10;
  double beta;
  double xi;
  double epsilon;
} TsagaChainParams;

// Per-round recovery summary.
typedef struct TsagaRecoveryInfo {
  double v_post;
  size_t iterations;
  bool diverged;
  bool em_ran;
} TsagaRecoveryInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t tsaga_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *tsaga_version(void);

// Stationary parameters: `p10` and `xi` are derived from the others.
//
// # Safety
// `out` must be null or valid for writes.
enum TsagaStatus tsaga_chain_params_stationary(double lambda,
                                               double gamma,
                                               double p01,
                                               double beta,
                                               double epsilon,
                                               struct TsagaChainParams *out);

// Scalar Bernoulli-Gaussian MMSE denoiser.
//
// # Safety
// `mean` and `var` must be null or valid for writes.
enum TsagaStatus tsaga_denoise_bg(double z,
                                  double tau,
                                  double pi,
                                  double m,
                                  double phi,
                                  double *mean,
                                  double *var);

// Builds the operator used for round `round` of a run seeded with `seed`.
//
// # Safety
// `out` must be null or valid for writes.
enum TsagaStatus tsaga_operator_new(size_t n,
                                    size_t s,
                                    uint64_t seed,
                                    uint64_t round,
                                    struct TsagaOperator **out);

// # Safety
// `op` must be null or a handle from [`tsaga_operator_new`] not yet freed.
void tsaga_operator_free(struct TsagaOperator *op);

// `y = A x` with `x` of length `n` and `y` of length `s`.
//
// # Safety
// Pointers must reference arrays of the stated lengths.
enum TsagaStatus tsaga_operator_forward(const struct TsagaOperator *op,
                                        const double *x,
                                        size_t n,
                                        double *y,
                                        size_t s);

// `x = Aᵀ y`.
//
// # Safety
// Pointers must reference arrays of the stated lengths.
enum TsagaStatus tsaga_operator_adjoint(const struct TsagaOperator *op,
                                        const double *y,
                                        size_t s,
                                        double *x,
                                        size_t n);

// Recovery engine over signals of length `n` with default tracking
// settings (parameter learning on).
//
// # Safety
// `params` must be readable and `out` writable.
enum TsagaStatus tsaga_tracker_new(size_t n,
                                   const struct TsagaChainParams *params,
                                   enum TsagaVariant variant,
                                   struct TsagaTracker **out);

// # Safety
// `t` must be null or a handle from [`tsaga_tracker_new`] not yet freed.
void tsaga_tracker_free(struct TsagaTracker *t);

// Recovers the next round's signal from `y = A x + noise` and advances the
// engine. `info` may be null.
//
// # Safety
// Pointers must reference arrays of the stated lengths.
enum TsagaStatus tsaga_tracker_recover(struct TsagaTracker *t,
                                       const struct TsagaOperator *op,
                                       const double *y,
                                       size_t s,
                                       double sigma2,
                                       double *x_hat,
                                       size_t n,
                                       struct TsagaRecoveryInfo *info);

// Current parameter estimates.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum TsagaStatus tsaga_tracker_params(const struct TsagaTracker *t, struct TsagaChainParams *out);

// Runs the experiment described by the TOML file at `config_path` and
// writes its outputs to `out_dir` (or the configured directory when null).
// Returns `TSAGA_STATUS_DIVERGED` if any round was flagged.
//
// # Safety
// Strings must be NUL-terminated or null (`out_dir` only).
enum TsagaStatus tsaga_run_experiment(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSAGA_H */
