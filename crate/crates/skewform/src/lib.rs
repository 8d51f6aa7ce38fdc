//! Critical curves of exponential curvature energies in two-dimensional
//! space forms, and the rotational surfaces of constant skew curvature they
//! sweep out.
//!
//! The library studies curves that are critical for the functional
//! `integral of exp(mu * kappa) ds` in the plane, the round sphere of
//! curvature `rho > 0`, or the hyperbolic plane of curvature `rho < 0`.
//! A conserved first integral reduces the Euler-Lagrange equation to a
//! one-parameter family of levels `d > 0` of an explicit energy function in
//! the phase plane `(x, y) = (exp(mu * kappa), x_s)`. Each level decomposes
//! into branches (axis-touching arcs, closed loops, separatrix arcs), every
//! branch integrates to a profile curve in the ambient quadric, and each
//! profile classifies into one of six shapes: oval, simple biconcave,
//! figure-eight, non-simple biconcave, borderline, or orbit-like.
//!
//! Rotating a profile curve about its symmetry axis produces a surface whose
//! principal curvatures differ by the constant `1/mu` everywhere (constant
//! skew curvature); the surface modules build, verify, and export those
//! meshes.
//!
//! Modules:
//! - [`geometry`]: ambient quadric models and the profile embedding map.
//! - [`energy`]: the functional, its Euler-Lagrange residual, first
//!   integral, constant-curvature solutions, and dilation.
//! - [`phase`]: the phase-plane level function, stationary points, root
//!   structure, and branch decomposition.
//! - [`trace`]: numerical integration of branches into sampled profile
//!   curves, the turning-point quadrature for the junction angle, and the
//!   curve CSV export.
//! - [`classify`]: the shape taxonomy and the solvers for the special
//!   levels separating the shapes.
//! - [`surface`]: surface-of-revolution meshes, invariant verification, and
//!   OBJ export.
//! - [`cli`]: the `skewform` command-line interface.

pub mod classify;
pub mod cli;
pub mod energy;
pub mod geometry;
mod num;
pub mod phase;
pub mod surface;
pub mod trace;

use thiserror::Error;

/// Errors produced by the library modules.
#[derive(Debug, Error)]
pub enum Error {
    /// The energy index is zero; the functional degenerates to arc length,
    /// every geodesic is critical, and no finite classification applies.
    #[error("energy index mu = 0 degenerates to the length functional")]
    DegenerateIndex,
    /// A quantity that must be strictly positive was not.
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    /// A quantity that must be a finite number was not.
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    /// The Euler-Lagrange residual needs the second curvature derivative.
    #[error("curvature state carries no second derivative")]
    MissingSecondDerivative,
    /// A chart point left the sphere model: rho * u^2 exceeded d.
    #[error("point outside the sphere chart: rho*u^2 = {ru_sq} exceeds d = {d}")]
    OutsideChart { ru_sq: f64, d: f64 },
    /// Dilation is a symmetry of the flat case only.
    #[error("dilation requires rho = 0, got rho = {rho}")]
    RequiresFlat { rho: f64 },
    /// The pole level is defined on the sphere only.
    #[error("pole level requires rho > 0, got rho = {rho}")]
    RequiresSphere { rho: f64 },
    /// The requested branch does not occur on the level set.
    #[error("level d = {d} has no {wanted} branch")]
    NoSuchBranch { wanted: String, d: f64 },
    /// The junction angle diverges at a separatrix level (the turning point
    /// is a double root, so the improper integral has a log blowup).
    #[error("junction angle diverges at the separatrix level d = {d}")]
    SeparatrixDivergence { d: f64 },
    /// The angle quadrature hit the chart pole; the pole-passing level on
    /// the sphere needs the dedicated pole-aware computation.
    #[error("level d = {d} passes through the pole; use the pole-aware angle computation")]
    PoleLevel { d: f64 },
    /// The pole lies on the loop branch, not on the axis branch, so an
    /// axis-to-pole junction angle does not exist.
    #[error("pole lies on a loop branch at mu = {mu}; the axis branch does not reach it")]
    PoleOnLoop { mu: f64 },
    /// A root bracket could not be established.
    #[error("no sign change in [{lo}, {hi}]; cannot bracket a root")]
    NoSignChange { lo: f64, hi: f64 },
    /// A numerical tolerance could not be met.
    #[error("numerical tolerance not reached in {what}")]
    Tolerance { what: &'static str },
    /// The adaptive integrator step size underflowed.
    #[error("integration step underflow in {what}")]
    StepUnderflow { what: &'static str },
    /// Completion by reflection applies only to branches that reach the
    /// rotation axis.
    #[error("reflection completion requires an axis-touching branch, got {got}")]
    NotAxisBranch { got: String },
    /// Revolving an already-reflected profile would sweep the surface twice.
    #[error("profile is already closed by reflection; revolve the one-sided branch instead")]
    ReflectedProfile,
    /// Period counts above one are meaningful only for periodic profiles.
    #[error("multiple periods require a periodic profile, got completion {got}")]
    NotPeriodic { got: String },
    /// Too few angular samples to form faces.
    #[error("angular sample count must be at least 3, got {got}")]
    TooFewSlices { got: usize },
}

impl Error {
    pub(crate) fn from_num(e: num::NumError, what: &'static str) -> Self {
        match e {
            num::NumError::Tolerance => Error::Tolerance { what },
            num::NumError::StepUnderflow => Error::StepUnderflow { what },
        }
    }

    /// True for errors caused by the supplied parameters; false for
    /// numeric breakdowns encountered during a computation.
    pub fn is_parameter_error(&self) -> bool {
        match self {
            Error::DegenerateIndex
            | Error::NotPositive { .. }
            | Error::NotFinite { .. }
            | Error::MissingSecondDerivative
            | Error::RequiresFlat { .. }
            | Error::RequiresSphere { .. }
            | Error::NoSuchBranch { .. }
            | Error::NotAxisBranch { .. }
            | Error::ReflectedProfile
            | Error::NotPeriodic { .. }
            | Error::TooFewSlices { .. } => true,
            Error::OutsideChart { .. }
            | Error::SeparatrixDivergence { .. }
            | Error::PoleLevel { .. }
            | Error::PoleOnLoop { .. }
            | Error::NoSignChange { .. }
            | Error::Tolerance { .. }
            | Error::StepUnderflow { .. } => false,
        }
    }
}

/// Convenience alias for library results.
pub type Result<T> = std::result::Result<T, Error>;
