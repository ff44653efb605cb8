#ifndef PCRESAMPLE_H
#define PCRESAMPLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcrStatus {
  PCR_STATUS_OK = 0,
  PCR_STATUS_NULL_POINTER = 1,
  PCR_STATUS_INVALID_ARGUMENT = 2,
  PCR_STATUS_IO = 3,
  PCR_STATUS_DEGENERATE = 4,
  PCR_STATUS_NUMERICAL = 5,
  PCR_STATUS_PANIC = 6,
} PcrStatus;

typedef enum PcrStrategy {
  PCR_STRATEGY_ALLPASS = 0,
  PCR_STRATEGY_HIGHPASS = 1,
  PCR_STRATEGY_LOWPASS_HAAR = 2,
  PCR_STRATEGY_LOWPASS_IDEAL = 3,
} PcrStrategy;

typedef struct PcrCloud PcrCloud;

typedef struct PcrDistribution PcrDistribution;

// Parameters for [`pcr_distribution`]. Start from [`pcr_params_default`].
typedef struct PcrParams {
  // Gaussian kernel width; `<= 0` picks it from nearest-neighbor distances.
  double sigma;
  // Edge radius; `<= 0` means `2 * sigma`.
  double tau;
  // Spectral norm the coordinates are scaled to.
  double c;
  // Band size for the ideal low-pass strategy.
  size_t bandwidth;
  // High-pass score exponent, 1 or 2.
  uint32_t exponent;
  // Weight of the uniform floor mixed into the result, in `[0, 1]`.
  double beta;
} PcrParams;

typedef struct PcrSphere {
  double center[3];
  double radius;
  double rms_residual;
} PcrSphere;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *pcr_last_error(void);

const char *pcr_version(void);

struct PcrParams pcr_params_default(void);

// Builds a cloud from `n` row-major xyz triples and optional row-major
// attributes (`attrs` may be null when `attr_dim` is 0).
//
// # Safety
// `xyz` must point to `3 * n` doubles, `attrs` to `n * attr_dim` doubles,
// and `out` must be writable.
enum PcrStatus pcr_cloud_from_xyz(const double *xyz,
                                  size_t n,
                                  const double *attrs,
                                  size_t attr_dim,
                                  struct PcrCloud **out);

// Loads a `.csv`, `.xyz` or `.ply` file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum PcrStatus pcr_cloud_load(const char *path, struct PcrCloud **out);

// # Safety
// `cloud` must come from this library and not be used afterwards.
void pcr_cloud_free(struct PcrCloud *cloud);

// Number of points; 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t pcr_cloud_len(const struct PcrCloud *cloud);

// Number of attribute columns; 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t pcr_cloud_attr_dim(const struct PcrCloud *cloud);

// Squared norm of each point's Haar high-pass response on a transition
// graph. `sigma`/`tau <= 0` select them automatically.
//
// # Safety
// `cloud` must be live and `out` must hold `out_len` doubles.
enum PcrStatus pcr_local_variation(const struct PcrCloud *cloud,
                                   double sigma,
                                   double tau,
                                   bool include_attrs,
                                   double *out,
                                   size_t out_len);

// Resampling distribution for `strategy`, one of the [`PcrStrategy`]
// values. The cloud is recentered and
// scaled to spectral norm `params.c` first; the graph is built on that
// normalized cloud.
//
// # Safety
// `cloud` must be live, `params` null or valid, and `out` writable.
enum PcrStatus pcr_distribution(const struct PcrCloud *cloud,
                                uint32_t strategy,
                                const struct PcrParams *params,
                                struct PcrDistribution **out);

// # Safety
// `dist` must come from this library and not be used afterwards.
void pcr_distribution_free(struct PcrDistribution *dist);

// # Safety
// `dist` must be null or a live handle.
size_t pcr_distribution_len(const struct PcrDistribution *dist);

// Copies the probabilities into `out`.
//
// # Safety
// `dist` must be live and `out` must hold `out_len` doubles.
enum PcrStatus pcr_distribution_probs(const struct PcrDistribution *dist,
                                      double *out,
                                      size_t out_len);

// Draws `m` indices i.i.d. from `dist` and writes them with their
// reconstruction weights `1/sqrt(m * pi)`. Deterministic in `seed`.
//
// # Safety
// `dist` must be live; `indices` and `weights` must each hold `m` values.
enum PcrStatus pcr_sample(const struct PcrDistribution *dist,
                          size_t m,
                          uint64_t seed,
                          size_t *indices,
                          double *weights);

// Least-squares sphere through the cloud's coordinates.
//
// # Safety
// `cloud` must be live and `out` writable.
enum PcrStatus pcr_fit_sphere(const struct PcrCloud *cloud, struct PcrSphere *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCRESAMPLE_H */
