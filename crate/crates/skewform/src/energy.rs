//! The variational core: the curvature energy, its Euler-Lagrange residual,
//! the conserved first integral, constant-curvature solutions, and the two
//! exact symmetries (orientation reversal and, in the flat case, dilation).
//!
//! The energy of a curve is the arc-length integral of `exp(mu * kappa)`.
//! Critical curves satisfy a second-order ODE for `kappa(s)` that conserves
//! `d = exp(2 mu kappa) (mu^4 kappa_s^2 + (mu kappa - 1)^2 + rho mu^2)`,
//! and this module is the single source of truth for both expressions.

use crate::geometry::SpaceForm;
use crate::{Error, Result};

/// The pair (mu, rho) identifying one energy functional on one space form.
///
/// The stored index is always positive: constructing a problem with a
/// negative index flips the curve orientation instead (curvature negates
/// under orientation reversal, so the two problems have the same critical
/// curves traversed backwards). The flip is recorded so that callers can
/// restore input-convention curvature signs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyProblem {
    mu: f64,
    rho: f64,
    flipped: bool,
}

impl EnergyProblem {
    /// Builds a problem from a signed index and an ambient curvature,
    /// canonicalizing the index to be positive.
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NotFinite {
                name: "energy index mu",
                value: mu,
            });
        }
        if !rho.is_finite() {
            return Err(Error::NotFinite {
                name: "ambient curvature rho",
                value: rho,
            });
        }
        if mu == 0.0 {
            return Err(Error::DegenerateIndex);
        }
        Ok(EnergyProblem {
            mu: mu.abs(),
            rho,
            flipped: mu < 0.0,
        })
    }

    /// Canonical (positive) energy index.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Ambient sectional curvature.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Whether the input index was negative and the orientation flipped.
    pub fn flipped(&self) -> bool {
        self.flipped
    }

    /// Index in the caller's orientation convention.
    pub fn signed_mu(&self) -> f64 {
        if self.flipped {
            -self.mu
        } else {
            self.mu
        }
    }

    /// The ambient space form.
    pub fn space_form(&self) -> SpaceForm {
        SpaceForm::new(self.rho)
    }

    /// The combination `rho * mu^2` governing the stationary-point regime.
    pub fn rho_mu_sq(&self) -> f64 {
        self.rho * self.mu * self.mu
    }

    /// Discriminant `1 - 4 rho mu^2` of the constant-curvature quadratic.
    pub fn discriminant(&self) -> f64 {
        1.0 - 4.0 * self.rho_mu_sq()
    }
}

/// Pointwise curvature data of a curve, with the second derivative present
/// only when the caller has one (finite differences or an exact formula).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureState {
    pub kappa: f64,
    pub kappa_s: f64,
    pub kappa_ss: Option<f64>,
}

impl CurvatureState {
    pub fn new(kappa: f64, kappa_s: f64) -> Self {
        CurvatureState {
            kappa,
            kappa_s,
            kappa_ss: None,
        }
    }

    pub fn with_second(kappa: f64, kappa_s: f64, kappa_ss: f64) -> Self {
        CurvatureState {
            kappa,
            kappa_s,
            kappa_ss: Some(kappa_ss),
        }
    }
}

/// Euler-Lagrange residual
/// `exp(mu kappa) (mu kappa_ss + mu^2 kappa_s^2 + kappa^2 - kappa/mu + rho)`;
/// zero exactly on critical curves.
pub fn el_residual(state: &CurvatureState, prob: &EnergyProblem) -> Result<f64> {
    let kss = state.kappa_ss.ok_or(Error::MissingSecondDerivative)?;
    let mu = prob.mu();
    let k = state.kappa;
    let ks = state.kappa_s;
    Ok((mu * k).exp() * (mu * kss + mu * mu * ks * ks + k * k - k / mu + prob.rho()))
}

/// The conserved constant
/// `d = exp(2 mu kappa) (mu^4 kappa_s^2 + (mu kappa - 1)^2 + rho mu^2)`.
pub fn first_integral_level(state: &CurvatureState, prob: &EnergyProblem) -> f64 {
    let mu = prob.mu();
    let e = (mu * state.kappa).exp();
    let m4 = mu * mu * mu * mu;
    e * e * (m4 * state.kappa_s * state.kappa_s + (mu * state.kappa - 1.0).powi(2) + prob.rho_mu_sq())
}

/// Geometric species of a constant-curvature critical curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantKind {
    /// Straight geodesic (flat case, curvature zero).
    Geodesic,
    /// Metric circle.
    Circle,
    /// Distance circle around a point of the sphere (both roots qualify).
    Parallel,
    /// Equidistant curve of a geodesic in the hyperbolic plane
    /// (curvature squared below `-rho`).
    Hypercycle,
}

/// One constant-curvature solution `kappa(s) = kappa0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSolution {
    pub kappa0: f64,
    pub kind: ConstantKind,
    /// True when the quadratic has a double root (`4 rho mu^2 = 1`).
    pub double_root: bool,
}

/// All constant-curvature critical curves: the real roots of
/// `kappa^2 - kappa/mu + rho = 0`, sorted increasing.
///
/// There are two roots when `4 rho mu^2 < 1`, one double root when
/// `4 rho mu^2 = 1`, and none otherwise. Species: in the flat case the
/// roots are a geodesic and a circle of curvature `1/mu`; on the sphere
/// both are parallels (a single circle of curvature `sqrt(rho)` at the
/// double root); in the hyperbolic plane the lower root is a hypercycle
/// and the upper a circle.
pub fn constant_solutions(prob: &EnergyProblem) -> Vec<ConstantSolution> {
    let mu = prob.mu();
    let rho = prob.rho();
    let disc = prob.discriminant();
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![ConstantSolution {
            kappa0: 0.5 / mu,
            kind: ConstantKind::Circle,
            double_root: true,
        }];
    }
    let sq = disc.sqrt();
    let lo = (1.0 - sq) / (2.0 * mu);
    let hi = (1.0 + sq) / (2.0 * mu);
    let (kind_lo, kind_hi) = if rho == 0.0 {
        (ConstantKind::Geodesic, ConstantKind::Circle)
    } else if rho > 0.0 {
        (ConstantKind::Parallel, ConstantKind::Parallel)
    } else {
        // kappa_lo^2 < -rho < kappa_hi^2; the horocycle boundary value
        // kappa^2 = -rho would force disc = 0, excluded here
        (ConstantKind::Hypercycle, ConstantKind::Circle)
    };
    vec![
        ConstantSolution {
            kappa0: lo,
            kind: kind_lo,
            double_root: false,
        },
        ConstantSolution {
            kappa0: hi,
            kind: kind_hi,
            double_root: false,
        },
    ]
}

/// The same critical curves traversed backwards: toggles the recorded
/// orientation flip. The signed index negates; curvature samples negate and
/// reverse in arc length.
pub fn reverse_orientation(prob: &EnergyProblem) -> EnergyProblem {
    EnergyProblem {
        mu: prob.mu,
        rho: prob.rho,
        flipped: !prob.flipped,
    }
}

/// Dilation symmetry of the flat case: scaling a critical curve by
/// `lambda` gives a critical curve for index `lambda * mu` at the same
/// level `d`.
pub fn dilate(prob: &EnergyProblem, lambda: f64) -> Result<EnergyProblem> {
    if prob.rho() != 0.0 {
        return Err(Error::RequiresFlat { rho: prob.rho() });
    }
    if !(lambda > 0.0) {
        return Err(Error::NotPositive {
            name: "dilation ratio lambda",
            value: lambda,
        });
    }
    Ok(EnergyProblem {
        mu: prob.mu * lambda,
        rho: 0.0,
        flipped: prob.flipped,
    })
}

/// Principal curvature pair of the revolved surface at a profile point of
/// curvature `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalCurvatures {
    pub k1: f64,
    pub k2: f64,
}

/// Principal curvatures `(k1, k2) = (-kappa, -kappa + 1/mu)` of the
/// revolved surface along the profile; their difference is the constant
/// skew curvature `1/mu`.
pub fn principal_curvatures_from_profile(kappa: f64, prob: &EnergyProblem) -> PrincipalCurvatures {
    PrincipalCurvatures {
        k1: -kappa,
        k2: -kappa + 1.0 / prob.mu(),
    }
}
