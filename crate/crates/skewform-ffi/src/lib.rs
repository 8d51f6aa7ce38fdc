//! C bindings over the critical-curve library: opaque handles, plain
//! status codes, and a flat sample struct.
//!
//! Ownership: `sf_problem_new` and `sf_trace` hand back owned handles that
//! must be released with the matching free function. Handles are immutable
//! after creation, so distinct handles may be used from distinct threads
//! freely. A NULL pointer where a value is required yields
//! `SF_NULL_POINTER`; no entry point aborts the process (internal panics
//! are caught and surface as `SF_NUMERIC`).
//!
//! The generated header lives at `include/skewform.h` and is kept in tree;
//! the build script rewrites it from these sources on every build.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use skewform::classify;
use skewform::energy::EnergyProblem;
use skewform::phase::{self, BranchDescriptor, BranchKind};
use skewform::trace::{integrate_profile, psi_at_zero, ProfileCurve, TraceOptions};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    /// The call succeeded.
    SF_OK = 0,
    /// A required pointer argument was NULL.
    SF_NULL_POINTER = 1,
    /// The supplied parameters are invalid for the requested operation.
    SF_INVALID_ARGUMENT = 2,
    /// A numeric computation broke down for these parameters.
    SF_NUMERIC = 3,
}

use SfStatus::*;

/// Opaque handle for a validated problem: an energy index and an ambient
/// curvature. A negative index is canonicalized to its absolute value.
pub struct SfProblem {
    inner: EnergyProblem,
}

/// Opaque handle for one traced profile curve.
pub struct SfCurve {
    inner: ProfileCurve,
}

/// One traced sample: arc length, phase-plane coordinates, curvature,
/// tangent angle, and the ambient model point. At axis limit samples the
/// curvature is negative infinity.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub kappa: f64,
    pub psi: f64,
    pub point: [f64; 3],
}

fn status_of(err: &skewform::Error) -> SfStatus {
    if err.is_parameter_error() {
        SF_INVALID_ARGUMENT
    } else {
        SF_NUMERIC
    }
}

/// Runs a closure, converting panics into a numeric status.
fn guarded(body: impl FnOnce() -> SfStatus) -> SfStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(SF_NUMERIC)
}

unsafe fn parse_kind(branch: *const c_char) -> Result<BranchKind, SfStatus> {
    if branch.is_null() {
        return Err(SF_NULL_POINTER);
    }
    let text = CStr::from_ptr(branch)
        .to_str()
        .map_err(|_| SF_INVALID_ARGUMENT)?;
    text.parse().map_err(|_| SF_INVALID_ARGUMENT)
}

fn find_branch(prob: &EnergyProblem, d: f64, kind: BranchKind) -> Result<BranchDescriptor, SfStatus> {
    if !(d > 0.0) {
        return Err(SF_INVALID_ARGUMENT);
    }
    phase::components(d, prob)
        .into_iter()
        .find(|b| b.kind == kind)
        .ok_or(SF_INVALID_ARGUMENT)
}

/// Creates a problem handle for energy index `mu` and ambient curvature
/// `rho`. On success writes an owned handle to `out`; release it with
/// `sf_problem_free`.
#[no_mangle]
pub unsafe extern "C" fn sf_problem_new(mu: f64, rho: f64, out: *mut *mut SfProblem) -> SfStatus {
    if out.is_null() {
        return SF_NULL_POINTER;
    }
    guarded(|| match EnergyProblem::new(mu, rho) {
        Ok(inner) => {
            out.write(Box::into_raw(Box::new(SfProblem { inner })));
            SF_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Releases a problem handle. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sf_problem_free(problem: *mut SfProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// The canonical (positive) energy index of the handle.
#[no_mangle]
pub unsafe extern "C" fn sf_problem_mu(problem: *const SfProblem) -> f64 {
    if problem.is_null() {
        return f64::NAN;
    }
    (*problem).inner.mu()
}

/// The ambient sectional curvature of the handle.
#[no_mangle]
pub unsafe extern "C" fn sf_problem_rho(problem: *const SfProblem) -> f64 {
    if problem.is_null() {
        return f64::NAN;
    }
    (*problem).inner.rho()
}

/// Classifies the branch named `branch` ("axis", "loop", "sep-inner", or
/// "sep-outer") of the level set at `d` and writes the NUL-terminated
/// shape name (for example "oval" or "borderline (pole-passing)") into
/// `name`. A capacity of 64 bytes always suffices; a smaller buffer that
/// cannot hold the name yields `SF_INVALID_ARGUMENT`.
#[no_mangle]
pub unsafe extern "C" fn sf_classify(
    problem: *const SfProblem,
    d: f64,
    branch: *const c_char,
    name: *mut c_char,
    capacity: usize,
) -> SfStatus {
    if problem.is_null() || name.is_null() {
        return SF_NULL_POINTER;
    }
    let kind = match parse_kind(branch) {
        Ok(k) => k,
        Err(s) => return s,
    };
    let prob = &(*problem).inner;
    guarded(|| {
        let desc = match find_branch(prob, d, kind) {
            Ok(desc) => desc,
            Err(s) => return s,
        };
        let ty = match classify::classify(prob, d, &desc) {
            Ok(ty) => ty.to_string(),
            Err(e) => return status_of(&e),
        };
        let bytes = ty.as_bytes();
        if capacity < bytes.len() + 1 {
            return SF_INVALID_ARGUMENT;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), name.cast(), bytes.len());
        name.add(bytes.len()).write(0);
        SF_OK
    })
}

/// Solves for a special level of the problem and writes it to `out`.
/// `kind` is "figure-eight", "borderline", or "pole". A problem whose
/// phase plane has no saddle has no borderline level, and only spherical
/// problems have a pole level; both cases yield `SF_INVALID_ARGUMENT`.
#[no_mangle]
pub unsafe extern "C" fn sf_special_level(
    problem: *const SfProblem,
    kind: *const c_char,
    out: *mut f64,
) -> SfStatus {
    if problem.is_null() || kind.is_null() || out.is_null() {
        return SF_NULL_POINTER;
    }
    let name = match CStr::from_ptr(kind).to_str() {
        Ok(t) => t,
        Err(_) => return SF_INVALID_ARGUMENT,
    };
    let prob = &(*problem).inner;
    guarded(|| {
        let level = match name {
            "borderline" => match classify::borderline_level(prob) {
                Some(v) => Ok(v),
                None => return SF_INVALID_ARGUMENT,
            },
            "figure-eight" => classify::find_figure_eight(prob),
            "pole" => classify::pole_level(prob),
            _ => return SF_INVALID_ARGUMENT,
        };
        match level {
            Ok(v) => {
                out.write(v);
                SF_OK
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Evaluates the junction angle of the axis branch at level `d` and
/// writes it to `out`.
#[no_mangle]
pub unsafe extern "C" fn sf_psi_at_zero(
    problem: *const SfProblem,
    d: f64,
    out: *mut f64,
) -> SfStatus {
    if problem.is_null() || out.is_null() {
        return SF_NULL_POINTER;
    }
    let prob = &(*problem).inner;
    guarded(|| match psi_at_zero(prob, d) {
        Ok(v) => {
            out.write(v);
            SF_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Traces the branch named `branch` of the level set at `d` into a curve
/// handle. `samples_per_half` chooses the uniform output resolution per
/// half arc; pass 0 for the default (2048) and at least 16 otherwise. On
/// success writes an owned handle to `out`; release it with
/// `sf_curve_free`.
#[no_mangle]
pub unsafe extern "C" fn sf_trace(
    problem: *const SfProblem,
    d: f64,
    branch: *const c_char,
    samples_per_half: usize,
    out: *mut *mut SfCurve,
) -> SfStatus {
    if problem.is_null() || out.is_null() {
        return SF_NULL_POINTER;
    }
    let kind = match parse_kind(branch) {
        Ok(k) => k,
        Err(s) => return s,
    };
    let mut opts = TraceOptions::default();
    match samples_per_half {
        0 => {}
        1..=15 => return SF_INVALID_ARGUMENT,
        n => opts.samples_per_half = n,
    }
    let prob = &(*problem).inner;
    guarded(|| {
        let desc = match find_branch(prob, d, kind) {
            Ok(desc) => desc,
            Err(s) => return s,
        };
        match integrate_profile(prob, d, &desc, &opts) {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(SfCurve { inner })));
                SF_OK
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Number of samples in the curve; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_len(curve: *const SfCurve) -> usize {
    if curve.is_null() {
        return 0;
    }
    (*curve).inner.samples.len()
}

/// Copies the sample at `index` into `out`. An index past the end yields
/// `SF_INVALID_ARGUMENT`.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_sample(
    curve: *const SfCurve,
    index: usize,
    out: *mut SfSample,
) -> SfStatus {
    if curve.is_null() || out.is_null() {
        return SF_NULL_POINTER;
    }
    let samples = &(*curve).inner.samples;
    let Some(s) = samples.get(index) else {
        return SF_INVALID_ARGUMENT;
    };
    out.write(SfSample {
        s: s.s,
        x: s.x,
        y: s.y,
        kappa: s.kappa,
        psi: s.psi,
        point: s.point,
    });
    SF_OK
}

/// Arc-length period of a closed orbit; 0 for open arcs and NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_period(curve: *const SfCurve) -> f64 {
    if curve.is_null() {
        return 0.0;
    }
    (*curve).inner.period.unwrap_or(0.0)
}

/// Largest relative first-integral drift recorded along the trace; NaN
/// for NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_drift(curve: *const SfCurve) -> f64 {
    if curve.is_null() {
        return f64::NAN;
    }
    (*curve).inner.drift_max
}

/// Whether the trace runs through the chart pole of the sphere; false for
/// NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_pole_passing(curve: *const SfCurve) -> bool {
    if curve.is_null() {
        return false;
    }
    (*curve).inner.pole_passing
}

/// Releases a curve handle. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sf_curve_free(curve: *mut SfCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// The library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
