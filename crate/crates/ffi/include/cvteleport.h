#ifndef CVTELEPORT_H
#define CVTELEPORT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every call.
typedef enum CvtStatus {
  CVT_STATUS_OK = 0,
  // A required pointer argument was null.
  CVT_STATUS_NULL_POINTER = 1,
  // An argument was outside its domain.
  CVT_STATUS_INVALID_ARGUMENT = 2,
  // A numerical routine failed or produced an inconsistent value.
  CVT_STATUS_NUMERICAL = 3,
  // No sample survived the postselection threshold.
  CVT_STATUS_EMPTY_AFTER_POSTSELECTION = 4,
  // The caller's buffer cannot hold the result.
  CVT_STATUS_BUFFER_TOO_SMALL = 5,
  // Unexpected internal failure.
  CVT_STATUS_INTERNAL = 6,
} CvtStatus;

// Teleportation schemes.
typedef enum CvtScheme {
  CVT_SCHEME_DIRECT_SINGLE = 0,
  CVT_SCHEME_ADAPTIVE_SINGLE = 1,
  CVT_SCHEME_DIRECT_DUAL = 2,
  CVT_SCHEME_ADAPTIVE_DUAL = 3,
} CvtScheme;

// Sign convention of the beam-shape fluctuation.
typedef enum CvtThetaConvention {
  CVT_THETA_CONVENTION_BROADENING = 0,
  CVT_THETA_CONVENTION_NARROWING = 1,
} CvtThetaConvention;

// Opaque handle to a sampled transmission ensemble.
typedef struct CvtEnsemble CvtEnsemble;

// Channel constants in SI units.
typedef struct CvtBeamParams {
  double wavelength;
  double w0;
  double length;
  double aperture;
  double eta_m;
  double cn2;
  // A `CvtThetaConvention` value.
  int32_t theta_convention;
} CvtBeamParams;

// Mean fidelity with its Monte Carlo standard error.
typedef struct CvtMeanFidelity {
  double mean_fidelity;
  double std_error;
  // Fraction of events kept by the postselection.
  double efficiency;
  size_t n_used;
} CvtMeanFidelity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static, NUL-terminated description of a `CvtStatus` value.
const char *cvt_status_message(int32_t status);

// Fidelity for squeezing `r` and amplitude transmissions `t_a`, `t_b`.
//
// # Safety
// `out` must be valid for writes.
enum CvtStatus cvt_fidelity(double r, double t_a, double t_b, double *out);

// Fidelity from the output covariance determinant; agrees with
// `cvt_fidelity` to rounding.
//
// # Safety
// `out` must be valid for writes.
enum CvtStatus cvt_fidelity_det(double r, double t_a, double t_b, double *out);

// Squeezing that maximizes the fidelity. When `t_a == t_b` the fidelity
// grows without a finite optimum: `*out_unbounded` is set and `*out_r` is
// infinity.
//
// # Safety
// `out_r` and `out_unbounded` must be valid for writes.
enum CvtStatus cvt_optimal_squeezing(double t_a, double t_b, double *out_r, bool *out_unbounded);

// Fidelity of the adaptive scheme, where both modes see transmission `t`.
//
// # Safety
// `out` must be valid for writes.
enum CvtStatus cvt_adaptive_fidelity(double r, double t, double *out);

// Squeezing above which the adaptive scheme beats the direct one at
// transmission `t_b`; unbounded for `t_b == 1`.
//
// # Safety
// `out_r` and `out_unbounded` must be valid for writes.
enum CvtStatus cvt_crossover_squeezing(double t_b, double *out_r, bool *out_unbounded);

// Samples `n` transmissions of the channel. The result depends only on
// `params`, `n` and `seed`.
//
// # Safety
// `params` must point to a valid struct and `out` must be valid for writes.
enum CvtStatus cvt_ensemble_sample(const struct CvtBeamParams *params,
                                   size_t n,
                                   uint64_t seed,
                                   struct CvtEnsemble **out);

// Wraps caller-provided transmissions, each in `[0, 1]`.
//
// # Safety
// `samples` must point to `len` readable values and `out` must be valid
// for writes.
enum CvtStatus cvt_ensemble_from_samples(const double *samples,
                                         size_t len,
                                         uint64_t seed,
                                         struct CvtEnsemble **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
size_t cvt_ensemble_len(const struct CvtEnsemble *e);

// Mean and standard deviation of the transmission.
//
// # Safety
// `e` must be a live handle; the out pointers must be valid for writes.
enum CvtStatus cvt_ensemble_moments(const struct CvtEnsemble *e,
                                    double *out_mean,
                                    double *out_std_dev);

// Copies the samples into `buf`, which must hold at least
// `cvt_ensemble_len(e)` values. `*out_written` receives the count, or the
// required size when the buffer is too small.
//
// # Safety
// `e` must be a live handle, `buf` valid for `cap` writes and
// `out_written` valid for writes.
enum CvtStatus cvt_ensemble_copy_samples(const struct CvtEnsemble *e,
                                         double *buf,
                                         size_t cap,
                                         size_t *out_written);

// Fraction of samples with transmission at or above `t_min`.
//
// # Safety
// `e` must be a live handle and `out` valid for writes.
enum CvtStatus cvt_ensemble_exceedance(const struct CvtEnsemble *e, double t_min, double *out);

// Releases a handle. Null is ignored.
//
// # Safety
// `e` must be null or a handle not yet freed.
void cvt_ensemble_free(struct CvtEnsemble *e);

// Mean fidelity with mode B through the channel `b` for the `CvtScheme`
// value `scheme`, keeping events with transmission at or above `t_min`
// (0 keeps all).
//
// # Safety
// `b` must be a live handle and `out` valid for writes.
enum CvtStatus cvt_mean_fidelity_single(double r,
                                        const struct CvtEnsemble *b,
                                        int32_t scheme,
                                        double t_min,
                                        struct CvtMeanFidelity *out);

// Mean fidelity of the `CvtScheme` value `scheme` with both modes through
// independent channels paired by sample index, keeping pairs with `T_a >= t_min_a` and `T_b >= t_min_b`.
//
// # Safety
// `a` and `b` must be live handles and `out` valid for writes.
enum CvtStatus cvt_mean_fidelity_dual(double r,
                                      const struct CvtEnsemble *a,
                                      const struct CvtEnsemble *b,
                                      int32_t scheme,
                                      double t_min_a,
                                      double t_min_b,
                                      struct CvtMeanFidelity *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVTELEPORT_H */
