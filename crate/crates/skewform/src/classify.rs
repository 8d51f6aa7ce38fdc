//! Shape taxonomy of the profile curves and solvers for the special levels
//! that separate the shapes.
//!
//! Closing an axis branch by reflection gives a curve whose shape is read
//! off the phase-plane data alone. Branches staying at or below `x = e` are
//! convex ovals. Beyond `e` the junction angle `psi(0)` decides: negative
//! gives a simple biconcave curve, zero a figure-eight, positive a
//! non-simple biconcave curve. The outer separatrix arc gives the
//! borderline shape, loops give orbit-like curves, and the inner
//! separatrix arc is the limiting oval. On the sphere the level through
//! the chart pole adds a half-turn jump to the junction angle; there the
//! jump-corrected angle runs the same trichotomy, and below its zero the
//! half-curve turning angle separates pole-passing ovals from simple
//! biconcave curves.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;

use serde::Serialize;

use crate::energy::{ConstantKind, EnergyProblem};
use crate::num;
use crate::phase::{self, BranchDescriptor, BranchKind};
use crate::trace;
use crate::{Error, Result};

const E: f64 = std::f64::consts::E;

/// Equality tolerance on the junction angle for the figure-eight shape.
const PSI_ZERO_TOL: f64 = 1e-10;

/// Relative tolerance for recognizing the pole level.
const POLE_LEVEL_RTOL: f64 = 1e-10;

/// Shape of a critical curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveTag {
    /// Simple closed convex curve crossing the axis twice.
    Oval,
    /// Simple closed curve with two concave dents at the axis crossings.
    SimpleBiconcave,
    /// Closed curve crossing itself once on the axis.
    FigureEight,
    /// Closed curve whose self-intersections lie off the axis.
    NonSimpleBiconcave,
    /// Separatrix curve, asymptotic to a constant-curvature circle.
    Borderline,
    /// Periodic-curvature curve winding around the axis without meeting it.
    OrbitLike,
    /// Constant-curvature straight line in the flat case.
    Geodesic,
    /// Constant-curvature metric circle.
    Circle,
    /// Constant-curvature distance circle on the sphere.
    Parallel,
    /// Constant-curvature equidistant curve in the hyperbolic plane.
    Hypercycle,
}

impl fmt::Display for CurveTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CurveTag::Oval => "oval",
            CurveTag::SimpleBiconcave => "simple-biconcave",
            CurveTag::FigureEight => "figure-eight",
            CurveTag::NonSimpleBiconcave => "non-simple-biconcave",
            CurveTag::Borderline => "borderline",
            CurveTag::OrbitLike => "orbit-like",
            CurveTag::Geodesic => "geodesic",
            CurveTag::Circle => "circle",
            CurveTag::Parallel => "parallel",
            CurveTag::Hypercycle => "hypercycle",
        };
        f.write_str(name)
    }
}

/// Refinement attached to a shape when the level is special.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Qualifier {
    /// Inner separatrix arc: the oval is the limit shape, not attained.
    SeparatrixLimit,
    /// The branch reaches the chart pole of the sphere.
    PolePassing,
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Qualifier::SeparatrixLimit => "separatrix-limit",
            Qualifier::PolePassing => "pole-passing",
        };
        f.write_str(name)
    }
}

/// Classified shape of a critical curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurveType {
    #[serde(rename = "type")]
    pub tag: CurveTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<Qualifier>,
}

impl CurveType {
    pub fn plain(tag: CurveTag) -> Self {
        CurveType {
            tag,
            qualifier: None,
        }
    }

    pub fn qualified(tag: CurveTag, q: Qualifier) -> Self {
        CurveType {
            tag,
            qualifier: Some(q),
        }
    }

    /// Shape of a constant-curvature solution.
    pub fn constant(kind: ConstantKind) -> Self {
        let tag = match kind {
            ConstantKind::Geodesic => CurveTag::Geodesic,
            ConstantKind::Circle => CurveTag::Circle,
            ConstantKind::Parallel => CurveTag::Parallel,
            ConstantKind::Hypercycle => CurveTag::Hypercycle,
        };
        CurveType::plain(tag)
    }
}

impl fmt::Display for CurveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qualifier {
            Some(q) => write!(f, "{} ({q})", self.tag),
            None => write!(f, "{}", self.tag),
        }
    }
}

/// Classifies the shape of the critical curve traced from `branch` on the
/// level `d`. The branch must be a component of the level set; branch
/// descriptors from [`phase::components`] always qualify.
pub fn classify(prob: &EnergyProblem, d: f64, branch: &BranchDescriptor) -> Result<CurveType> {
    if !(d > 0.0) {
        return Err(Error::NotPositive {
            name: "level d",
            value: d,
        });
    }
    let canon = phase::components(d, prob)
        .into_iter()
        .find(|b| b.kind == branch.kind)
        .ok_or_else(|| Error::NoSuchBranch {
            wanted: branch.kind.to_string(),
            d,
        })?;
    if (canon.x0 - branch.x0).abs() > 1e-6 * canon.x0.max(1.0) {
        return Err(Error::NoSuchBranch {
            wanted: format!("{} with x0 = {}", branch.kind, branch.x0),
            d,
        });
    }

    // a branch passes through the pole when the level is the pole level and
    // the branch reaches the abscissa x = e
    let pole_touch = prob.rho() > 0.0 && {
        let dp = trace::pole_level_value(prob);
        (d - dp).abs() <= POLE_LEVEL_RTOL * dp.max(1.0) && canon.x0 >= E * (1.0 - 1e-9)
    };
    let pole_qualifier = if pole_touch {
        Some(Qualifier::PolePassing)
    } else {
        None
    };

    match canon.kind {
        BranchKind::Loop => Ok(CurveType {
            tag: CurveTag::OrbitLike,
            qualifier: pole_qualifier,
        }),
        BranchKind::SepOuter => Ok(CurveType {
            tag: CurveTag::Borderline,
            qualifier: pole_qualifier,
        }),
        BranchKind::SepInner => Ok(CurveType::qualified(
            CurveTag::Oval,
            Qualifier::SeparatrixLimit,
        )),
        BranchKind::Axis => {
            if pole_touch {
                return pole_axis_type(prob);
            }
            if canon.x0 <= E {
                return Ok(CurveType::plain(CurveTag::Oval));
            }
            let psi0 = trace::psi_at_zero(prob, d)?;
            let tag = if psi0.abs() < PSI_ZERO_TOL {
                CurveTag::FigureEight
            } else if psi0 > 0.0 {
                CurveTag::NonSimpleBiconcave
            } else {
                CurveTag::SimpleBiconcave
            };
            Ok(CurveType::plain(tag))
        }
    }
}

/// Shape of the axis branch at the pole level. The chart jump shifts the
/// junction angle by `pi / (2 sqrt(rho d))`, and below the corrected zero
/// the half-curve turning angle `sqrt(rho d) * psi(0)` separates ovals
/// (at most a quarter turn) from simple biconcave curves.
fn pole_axis_type(prob: &EnergyProblem) -> Result<CurveType> {
    let dp = trace::pole_level_value(prob);
    let raw = trace::pole_psi(prob)?;
    let jump = FRAC_PI_2 / (prob.rho() * dp).sqrt();
    let psi_eff = raw - jump;
    let tag = if psi_eff.abs() < PSI_ZERO_TOL {
        CurveTag::FigureEight
    } else if psi_eff > 0.0 {
        CurveTag::NonSimpleBiconcave
    } else {
        let theta_half = (prob.rho() * dp).sqrt() * raw;
        if theta_half <= FRAC_PI_4 {
            CurveTag::Oval
        } else {
            CurveTag::SimpleBiconcave
        }
    };
    Ok(CurveType::qualified(tag, Qualifier::PolePassing))
}

/// Classifies every branch of the level set `F = d`.
pub fn classify_level(
    prob: &EnergyProblem,
    d: f64,
) -> Result<Vec<(BranchDescriptor, CurveType)>> {
    let mut out = Vec::new();
    for branch in phase::components(d, prob) {
        let ty = classify(prob, d, &branch)?;
        out.push((branch, ty));
    }
    Ok(out)
}

/// Level of the borderline curves: the separatrix level through the
/// saddle. Absent when the phase plane has no saddle.
pub fn borderline_level(prob: &EnergyProblem) -> Option<f64> {
    phase::separatrix_level(prob)
}

/// Level whose curves pass through the chart pole of the sphere.
pub fn pole_level(prob: &EnergyProblem) -> Result<f64> {
    if prob.rho() <= 0.0 {
        return Err(Error::RequiresSphere { rho: prob.rho() });
    }
    Ok(trace::pole_level_value(prob))
}

/// Level `d*` of the figure-eight curve: the zero of the junction angle
/// `psi(0)` on the outer family of axis branches. The bracket starts just
/// above the largest special level (separatrix, and pole on the sphere)
/// and grows geometrically; a missing sign change is reported, not
/// guessed, since on the sphere the corrected junction angle can already
/// be negative at the bottom of the family.
pub fn find_figure_eight(prob: &EnergyProblem) -> Result<f64> {
    let mut lo = phase::separatrix_level(prob).unwrap_or(0.0);
    if prob.rho() > 0.0 {
        lo = lo.max(trace::pole_level_value(prob));
    }
    lo *= 1.0 + 1e-9;
    let g = |d: f64| trace::psi_at_zero(prob, d).unwrap_or(f64::NAN);
    let glo = g(lo);
    let mut hi = lo;
    let mut ghi = glo;
    for _ in 0..60 {
        if !(ghi >= 0.0) {
            break;
        }
        hi *= 1.6;
        ghi = g(hi);
    }
    if !(glo > 0.0 && ghi < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let dstar = num::refine_root(g, lo, hi, 1e-15).ok_or(Error::Tolerance {
        what: "figure-eight level",
    })?;
    if !(g(dstar).abs() < PSI_ZERO_TOL) {
        return Err(Error::Tolerance {
            what: "figure-eight level",
        });
    }
    Ok(dstar)
}

/// Both transition indices depend on `mu` and `rho` only through
/// `q = rho mu^2`, so the solvers work on `q` and rescale.
fn mu_from_q(q: f64, rho: f64) -> f64 {
    (q / rho).sqrt()
}

/// Index `mu` at which the pole level meets the separatrix level, so the
/// pole sits on the saddle. Below it the pole lies on a loop, above it on
/// the axis branch.
pub fn pole_borderline_mu(rho: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::RequiresSphere { rho });
    }
    // sep(q) - pole(q) falls from 1 at q -> 0 to e/2 - e^2/4 < 0 at q = 1/4
    let g = |q: f64| {
        let disc = (1.0 - 4.0 * q).sqrt();
        let tm = 0.5 * (1.0 - disc);
        let tp = 0.5 * (1.0 + disc);
        (2.0 * tm).exp() * tp - q * E * E
    };
    let q = num::refine_root(g, 1e-12, 0.25 - 1e-12, 1e-15).ok_or(Error::Tolerance {
        what: "pole-borderline index",
    })?;
    Ok(mu_from_q(q, rho))
}

/// Index `mu` at which the pole-level axis curve is a figure-eight: the
/// zero of the jump-corrected junction angle. Between the borderline index
/// and this one the pole curve is non-simple biconcave; above it the
/// turning angle decides between simple biconcave and oval.
pub fn pole_figure_eight_mu(rho: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::RequiresSphere { rho });
    }
    let q_star = {
        let mu = pole_borderline_mu(rho)?;
        rho * mu * mu
    };
    let psi_eff = |q: f64| -> f64 {
        let Ok(prob) = EnergyProblem::new(mu_from_q(q, rho), rho) else {
            return f64::NAN;
        };
        let dp = trace::pole_level_value(&prob);
        match trace::pole_psi(&prob) {
            Ok(raw) => raw - FRAC_PI_2 / (prob.rho() * dp).sqrt(),
            Err(_) => f64::NAN,
        }
    };
    // just above q* the pole is barely past the saddle and the angle
    // integral spikes positive; at q = 1 the corrected angle is negative
    let mut lo = q_star * (1.0 + 1e-6);
    let mut glo = psi_eff(lo);
    for _ in 0..20 {
        if glo.is_finite() {
            break;
        }
        lo *= 1.0 + 1e-6;
        glo = psi_eff(lo);
    }
    let mut hi = lo;
    let mut ghi = glo;
    for _ in 0..30 {
        if !(ghi >= 0.0) {
            break;
        }
        hi *= 1.3;
        ghi = psi_eff(hi);
    }
    if !(glo > 0.0 && ghi < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let q = num::refine_root(psi_eff, lo, hi, 1e-15).ok_or(Error::Tolerance {
        what: "pole-figure-eight index",
    })?;
    Ok(mu_from_q(q, rho))
}
