#ifndef SKEWFORM_H
#define SKEWFORM_H

/* Generated from the skewform-ffi crate sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum SfStatus {
  // The call succeeded.
  SF_OK = 0,
  // A required pointer argument was NULL.
  SF_NULL_POINTER = 1,
  // The supplied parameters are invalid for the requested operation.
  SF_INVALID_ARGUMENT = 2,
  // A numeric computation broke down for these parameters.
  SF_NUMERIC = 3,
} SfStatus;

// Opaque handle for one traced profile curve.
typedef struct SfCurve SfCurve;

// Opaque handle for a validated problem: an energy index and an ambient
// curvature. A negative index is canonicalized to its absolute value.
typedef struct SfProblem SfProblem;

// One traced sample: arc length, phase-plane coordinates, curvature,
// tangent angle, and the ambient model point. At axis limit samples the
// curvature is negative infinity.
typedef struct SfSample {
  double s;
  double x;
  double y;
  double kappa;
  double psi;
  double point[3];
} SfSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a problem handle for energy index `mu` and ambient curvature
// `rho`. On success writes an owned handle to `out`; release it with
// `sf_problem_free`.
enum SfStatus sf_problem_new(double mu,
                             double rho,
                             struct SfProblem **out);

// Releases a problem handle. NULL is ignored.
void sf_problem_free(struct SfProblem *problem);

// The canonical (positive) energy index of the handle.
double sf_problem_mu(const struct SfProblem *problem);

// The ambient sectional curvature of the handle.
double sf_problem_rho(const struct SfProblem *problem);

// Classifies the branch named `branch` ("axis", "loop", "sep-inner", or
// "sep-outer") of the level set at `d` and writes the NUL-terminated
// shape name (for example "oval" or "borderline (pole-passing)") into
// `name`. A capacity of 64 bytes always suffices; a smaller buffer that
// cannot hold the name yields `SF_INVALID_ARGUMENT`.
enum SfStatus sf_classify(const struct SfProblem *problem,
                          double d,
                          const char *branch,
                          char *name,
                          size_t capacity);

// Solves for a special level of the problem and writes it to `out`.
// `kind` is "figure-eight", "borderline", or "pole". A problem whose
// phase plane has no saddle has no borderline level, and only spherical
// problems have a pole level; both cases yield `SF_INVALID_ARGUMENT`.
enum SfStatus sf_special_level(const struct SfProblem *problem,
                               const char *kind,
                               double *out);

// Evaluates the junction angle of the axis branch at level `d` and
// writes it to `out`.
enum SfStatus sf_psi_at_zero(const struct SfProblem *problem,
                             double d,
                             double *out);

// Traces the branch named `branch` of the level set at `d` into a curve
// handle. `samples_per_half` chooses the uniform output resolution per
// half arc; pass 0 for the default (2048) and at least 16 otherwise. On
// success writes an owned handle to `out`; release it with
// `sf_curve_free`.
enum SfStatus sf_trace(const struct SfProblem *problem,
                       double d,
                       const char *branch,
                       size_t samples_per_half,
                       struct SfCurve **out);

// Number of samples in the curve; 0 for NULL.
size_t sf_curve_len(const struct SfCurve *curve);

// Copies the sample at `index` into `out`. An index past the end yields
// `SF_INVALID_ARGUMENT`.
enum SfStatus sf_curve_sample(const struct SfCurve *curve,
                              size_t index,
                              struct SfSample *out);

// Arc-length period of a closed orbit; 0 for open arcs and NULL.
double sf_curve_period(const struct SfCurve *curve);

// Largest relative first-integral drift recorded along the trace; NaN
// for NULL.
double sf_curve_drift(const struct SfCurve *curve);

// Whether the trace runs through the chart pole of the sphere; false for
// NULL.
bool sf_curve_pole_passing(const struct SfCurve *curve);

// Releases a curve handle. NULL is ignored.
void sf_curve_free(struct SfCurve *curve);

// The library version as a static NUL-terminated string.
const char *sf_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SKEWFORM_H */
