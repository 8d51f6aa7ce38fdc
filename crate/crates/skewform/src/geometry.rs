//! Ambient models of the three 2-space forms inside affine 3-space and the
//! chart that embeds profile curves into them.
//!
//! The plane sits at third coordinate zero. The sphere of curvature
//! `rho > 0` is the quadric `x1^2 + x2^2 + x3^2 = 1/rho`. The hyperbolic
//! plane of curvature `rho < 0` is the upper sheet `x3 > 0` of
//! `x1^2 + x2^2 - x3^2 = 1/rho` under the Lorentzian form
//! `dx1^2 + dx2^2 - dx3^2`.
//!
//! Two geodesics organize everything: `alpha`, the fixed-point set of the
//! reflection negating the second coordinate, and `beta`, the rotation axis
//! cut out by first coordinate zero. Profile curves are symmetric across
//! `alpha` and meet `beta` orthogonally; surfaces revolve around `beta`.

use crate::{Error, Result};

/// Point of the ambient model in affine 3-space.
pub type AmbientPoint = [f64; 3];

/// Which quadric model the space form uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Flat plane at third coordinate zero.
    Plane,
    /// Round sphere `x1^2 + x2^2 + x3^2 = 1/rho`.
    SphereQuadric,
    /// Upper hyperboloid sheet `x1^2 + x2^2 - x3^2 = 1/rho`, `x3 > 0`.
    HyperboloidSheet,
}

/// A 2-space form of constant sectional curvature `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceForm {
    pub rho: f64,
    pub model: Model,
}

impl SpaceForm {
    /// Selects the model from the sign of the curvature.
    pub fn new(rho: f64) -> Self {
        let model = if rho == 0.0 {
            Model::Plane
        } else if rho > 0.0 {
            Model::SphereQuadric
        } else {
            Model::HyperboloidSheet
        };
        SpaceForm { rho, model }
    }
}

/// Embeds the chart coordinates `(u, v)` of a level `d` into the model.
///
/// The chart sends `u` to the distance-from-axis coordinate and `v` to the
/// angle (or translation, when `rho = 0`) along the orbits of the rotation
/// fixing the geodesic `beta`:
///
/// - `rho = 0`: `(u, d v, 0) / sqrt(d)`;
/// - `rho > 0`: `(sqrt(rho) u, R sin(sqrt(rho d) v), R cos(sqrt(rho d) v)) / sqrt(rho d)`;
/// - `rho < 0`: `(sqrt(-rho) u, R sinh(sqrt(-rho d) v), R cosh(sqrt(-rho d) v)) / sqrt(-rho d)`;
///
/// with `R = sqrt(d - rho u^2)`. Tiny negative values of `d - rho u^2`
/// (within `1e-9 * d`) are clamped to zero so that pole-touching traces on
/// the sphere stay inside the chart.
pub fn embed_phi(u: f64, v: f64, rho: f64, d: f64) -> Result<AmbientPoint> {
    if !(d > 0.0) {
        return Err(Error::NotPositive {
            name: "level d",
            value: d,
        });
    }
    if rho == 0.0 {
        let rd = d.sqrt();
        return Ok([u / rd, rd * v, 0.0]);
    }
    let mut r_sq = d - rho * u * u;
    if rho > 0.0 && r_sq < 0.0 {
        if r_sq >= -1e-9 * d {
            r_sq = 0.0;
        } else {
            return Err(Error::OutsideChart {
                ru_sq: rho * u * u,
                d,
            });
        }
    }
    let r = r_sq.sqrt();
    if rho > 0.0 {
        let w = (rho * d).sqrt();
        Ok([
            rho.sqrt() * u / w,
            r * (w * v).sin() / w,
            r * (w * v).cos() / w,
        ])
    } else {
        let w = (-rho * d).sqrt();
        Ok([
            (-rho).sqrt() * u / w,
            r * (w * v).sinh() / w,
            r * (w * v).cosh() / w,
        ])
    }
}

/// Distance of a point from its model quadric: `|x3|` for the plane,
/// `|x1^2 + x2^2 + x3^2 - 1/rho|` for the sphere, and
/// `|x1^2 + x2^2 - x3^2 - 1/rho|` for the hyperboloid.
pub fn model_residual(p: AmbientPoint, rho: f64) -> f64 {
    if rho == 0.0 {
        p[2].abs()
    } else if rho > 0.0 {
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - 1.0 / rho).abs()
    } else {
        (p[0] * p[0] + p[1] * p[1] - p[2] * p[2] - 1.0 / rho).abs()
    }
}

/// Reflection across the geodesic `alpha`: negates the second coordinate.
/// Profile curves are invariant under this map sample-for-sample.
pub fn reflect_alpha(p: AmbientPoint) -> AmbientPoint {
    [p[0], -p[1], p[2]]
}

/// Reflection across the rotation axis `beta`: negates the first
/// coordinate. Used to close axis-touching profiles into C1 curves.
pub fn reflect_beta(p: AmbientPoint) -> AmbientPoint {
    [-p[0], p[1], p[2]]
}
