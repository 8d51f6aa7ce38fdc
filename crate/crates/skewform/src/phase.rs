//! Phase-plane structure of the critical-curve equation.
//!
//! In the variables `x = exp(mu kappa)`, `y = x_s` the equation becomes the
//! autonomous system `x_s = y`, `y_s = -(x/mu^2)(ln^2 x - ln x + rho mu^2)`
//! whose orbits are level sets `F(x, y) = d` of
//! `F(x, y) = mu^2 y^2 + (ln x - 1)^2 x^2 + rho mu^2 x^2`.
//!
//! The restriction `Fhat(x) = F(x, 0)` has at most one local maximum (at
//! the saddle abscissa `x-`) and one local minimum (at the centre abscissa
//! `x+`), so a level `d > 0` meets the axis `y = 0` in one or three points,
//! or in two at the separatrix level through the saddle. Those roots cut
//! the level set into branches: arcs that reach the `y`-axis (axis
//! branches), closed loops around the centre, and the two separatrix arcs.

use crate::energy::EnergyProblem;
use crate::num::refine_root;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// A point of the phase plane `(x, y) = (exp(mu kappa), x_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64) -> Self {
        PhaseState { x, y }
    }
}

/// The orbit function `F(x, y)`; orbits are its level sets.
///
/// `x` must be nonnegative; the value at `x = 0` is the continuous limit
/// `mu^2 y^2`.
pub fn f_value(state: &PhaseState, prob: &EnergyProblem) -> f64 {
    let mu2 = prob.mu() * prob.mu();
    mu2 * state.y * state.y + fhat(state.x, prob)
}

/// The axis restriction `Fhat(x) = x^2 ((ln x - 1)^2 + rho mu^2)`, extended
/// by its limit `0` at `x = 0`.
pub fn fhat(x: f64, prob: &EnergyProblem) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let l = x.ln() - 1.0;
    x * x * (l * l + prob.rho_mu_sq())
}

/// Right-hand side of the autonomous phase system at `(x, y)`.
pub fn vector_field(state: &PhaseState, prob: &EnergyProblem) -> (f64, f64) {
    let x = state.x;
    if x == 0.0 {
        return (state.y, 0.0);
    }
    let t = x.ln();
    let mu2 = prob.mu() * prob.mu();
    (state.y, -(x / mu2) * (t * t - t + prob.rho_mu_sq()))
}

/// Linearized type of a stationary point of the phase flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointKind {
    Centre,
    Saddle,
    Degenerate,
}

/// One stationary point with its linearization eigenvalues, stored as two
/// complex numbers `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub x: f64,
    pub kind: PointKind,
    pub eigenvalues: [[f64; 2]; 2],
}

/// How many stationary points the parameter pair admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    TwoPoints,
    Degenerate,
    NoPoints,
}

/// Stationary points of the phase flow and their types.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryAnalysis {
    pub regime: Regime,
    /// Sorted by increasing `x`; empty, one degenerate, or saddle then
    /// centre.
    pub points: Vec<StationaryPoint>,
}

/// Stationary points sit at `ln x = (1 -+ sqrt(1 - 4 rho mu^2)) / 2` when
/// the discriminant is positive: a saddle at the lower abscissa with real
/// eigenvalue pair and a centre at the upper abscissa with an imaginary
/// pair, of common magnitude `(1 - 4 rho mu^2)^(1/4) / (sqrt(2) mu)`. At
/// discriminant zero the two merge into a single nilpotent point at
/// `sqrt(e)`, and for negative discriminant there are none.
pub fn stationary_points(prob: &EnergyProblem) -> StationaryAnalysis {
    let disc = prob.discriminant();
    if disc < 0.0 {
        return StationaryAnalysis {
            regime: Regime::NoPoints,
            points: Vec::new(),
        };
    }
    if disc == 0.0 {
        return StationaryAnalysis {
            regime: Regime::Degenerate,
            points: vec![StationaryPoint {
                x: 0.5f64.exp(),
                kind: PointKind::Degenerate,
                eigenvalues: [[0.0, 0.0], [0.0, 0.0]],
            }],
        };
    }
    let sq = disc.sqrt();
    let x_minus = ((1.0 - sq) / 2.0).exp();
    let x_plus = ((1.0 + sq) / 2.0).exp();
    let m = (sq / (2.0 * prob.mu() * prob.mu())).sqrt();
    StationaryAnalysis {
        regime: Regime::TwoPoints,
        points: vec![
            StationaryPoint {
                x: x_minus,
                kind: PointKind::Saddle,
                eigenvalues: [[m, 0.0], [-m, 0.0]],
            },
            StationaryPoint {
                x: x_plus,
                kind: PointKind::Centre,
                eigenvalues: [[0.0, m], [0.0, -m]],
            },
        ],
    }
}

/// Saddle and centre abscissae `(x-, x+)` when they exist.
pub(crate) fn saddle_centre(prob: &EnergyProblem) -> Option<(f64, f64)> {
    let disc = prob.discriminant();
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some((((1.0 - sq) / 2.0).exp(), ((1.0 + sq) / 2.0).exp()))
}

/// The level through the saddle, `Fhat(x-)`, in the closed form
/// `x-^2 ln x+`; `None` when there is no saddle.
pub fn separatrix_level(prob: &EnergyProblem) -> Option<f64> {
    let (x_minus, x_plus) = saddle_centre(prob)?;
    Some(x_minus * x_minus * x_plus.ln())
}

/// The level through the centre, `Fhat(x+) = x+^2 ln x-`.
pub(crate) fn centre_level(prob: &EnergyProblem) -> Option<f64> {
    let (x_minus, x_plus) = saddle_centre(prob)?;
    Some(x_plus * x_plus * x_minus.ln())
}

/// One solution of `Fhat(x) = d`, with double roots flagged instead of
/// duplicated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub x: f64,
    pub double: bool,
}

/// Relative tolerance deciding whether `d` sits on the separatrix or
/// centre level.
const LEVEL_TOL: f64 = 1e-10;

fn level_matches(d: f64, level: f64) -> bool {
    (d - level).abs() < LEVEL_TOL * level.abs().max(1.0)
}

const ROOT_TOL: f64 = 1e-13;

/// Refines the single root of `Fhat = d` on the increasing tail, searching
/// upward by doubling from `lo` (exclusive lower bound with `Fhat < d`).
fn outer_root(d: f64, prob: &EnergyProblem, lo: f64) -> f64 {
    let f = |x: f64| fhat(x, prob) - d;
    let mut hi = (std::f64::consts::E * (1.0 + d)).max(2.0 * lo);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    refine_root(f, lo, hi, ROOT_TOL).expect("monotone tail brackets the root")
}

/// Refines the root on the increasing branch `(0, hi)`, searching downward
/// by halving until the value drops below `d`.
fn inner_root(d: f64, prob: &EnergyProblem, hi: f64) -> f64 {
    let f = |x: f64| fhat(x, prob) - d;
    let mut lo = hi / 2.0;
    while f(lo) >= 0.0 {
        lo /= 2.0;
    }
    refine_root(f, lo, hi, ROOT_TOL).expect("increasing branch brackets the root")
}

/// All solutions of `Fhat(x) = d`, sorted increasing.
///
/// Away from the two special levels the count is one or three. At the
/// separatrix level the saddle abscissa is reported once with the double
/// flag, together with the outer simple root. At the centre level (reached
/// for positive `rho` only) the centre abscissa is the double root and the
/// other solution lies on the inner increasing branch. Nonpositive `d`
/// yields an empty list.
pub fn fhat_roots(d: f64, prob: &EnergyProblem) -> Vec<Root> {
    if !(d > 0.0) {
        return Vec::new();
    }
    let simple = |x: f64| Root { x, double: false };
    match saddle_centre(prob) {
        None => {
            // monotone shape: exactly one crossing
            vec![simple(outer_root(d, prob, f64::MIN_POSITIVE))]
        }
        Some((x_minus, x_plus)) => {
            let sep = separatrix_level(prob).expect("saddle exists");
            let centre = centre_level(prob).expect("centre exists");
            if level_matches(d, sep) {
                return vec![
                    Root {
                        x: x_minus,
                        double: true,
                    },
                    simple(outer_root(d, prob, x_plus)),
                ];
            }
            if d > sep {
                return vec![simple(outer_root(d, prob, x_plus))];
            }
            if level_matches(d, centre) {
                return vec![
                    simple(inner_root(d, prob, x_minus)),
                    Root {
                        x: x_plus,
                        double: true,
                    },
                ];
            }
            if d < centre {
                // possible only when the centre level is positive
                return vec![simple(inner_root(d, prob, x_minus))];
            }
            let f = |x: f64| fhat(x, prob) - d;
            let middle = refine_root(f, x_minus, x_plus, ROOT_TOL)
                .expect("decreasing branch brackets the middle root");
            vec![
                simple(inner_root(d, prob, x_minus)),
                simple(middle),
                simple(outer_root(d, prob, x_plus)),
            ]
        }
    }
}

/// Kind of connected component of a level set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    /// Arc reaching the `y`-axis, `x` in `(0, x0]`.
    Axis,
    /// Closed orbit around the centre, `x` in `[x_lo, x0]`.
    Loop,
    /// Separatrix arc between the axis and the saddle, `x` in `(0, x-)`.
    SepInner,
    /// Separatrix arc outside the saddle, `x` in `[x-, x0]`.
    SepOuter,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BranchKind::Axis => "axis",
            BranchKind::Loop => "loop",
            BranchKind::SepInner => "sep-inner",
            BranchKind::SepOuter => "sep-outer",
        };
        f.write_str(name)
    }
}

impl FromStr for BranchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "axis" => Ok(BranchKind::Axis),
            "loop" => Ok(BranchKind::Loop),
            "sep-inner" => Ok(BranchKind::SepInner),
            "sep-outer" => Ok(BranchKind::SepOuter),
            other => Err(format!(
                "unknown branch {other:?}; expected axis, loop, sep-inner, or sep-outer"
            )),
        }
    }
}

/// One connected component of the level set `F = d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchDescriptor {
    pub kind: BranchKind,
    /// Largest `x` on the component (attained with `y = 0` except on the
    /// inner separatrix arc, where it is the saddle limit).
    pub x0: f64,
    /// Smallest `x` on compact components.
    pub x_lo: Option<f64>,
}

/// Decomposes the level set `F = d` into its connected components.
///
/// Three axis roots give an axis branch up to the smallest root and a loop
/// between the larger two. One root gives a single axis branch. The
/// separatrix level gives the two saddle arcs. At the centre level the
/// loop shrinks to the stationary point, which is a constant-curvature
/// solution rather than a branch, so only the axis component is reported.
pub fn components(d: f64, prob: &EnergyProblem) -> Vec<BranchDescriptor> {
    let roots = fhat_roots(d, prob);
    match roots.len() {
        1 => vec![BranchDescriptor {
            kind: BranchKind::Axis,
            x0: roots[0].x,
            x_lo: None,
        }],
        2 if roots[0].double => vec![
            BranchDescriptor {
                kind: BranchKind::SepInner,
                x0: roots[0].x,
                x_lo: None,
            },
            BranchDescriptor {
                kind: BranchKind::SepOuter,
                x0: roots[1].x,
                x_lo: Some(roots[0].x),
            },
        ],
        2 => vec![BranchDescriptor {
            kind: BranchKind::Axis,
            x0: roots[0].x,
            x_lo: None,
        }],
        3 => vec![
            BranchDescriptor {
                kind: BranchKind::Axis,
                x0: roots[0].x,
                x_lo: None,
            },
            BranchDescriptor {
                kind: BranchKind::Loop,
                x0: roots[2].x,
                x_lo: Some(roots[1].x),
            },
        ],
        _ => Vec::new(),
    }
}

/// Polyline of one branch for plotting, as `[x, y]` pairs tracing the
/// upper half from low `x` to `x0` and back along the lower half.
#[derive(Debug, Clone, Serialize)]
pub struct BranchPolyline {
    pub descriptor: BranchDescriptor,
    pub points: Vec<[f64; 2]>,
}

/// One exported level with its branch polylines.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSet {
    pub d: f64,
    pub branches: Vec<BranchPolyline>,
}

/// Plot-ready phase portrait document.
#[derive(Debug, Clone, Serialize)]
pub struct PhasePortrait {
    pub rho: f64,
    pub mu: f64,
    pub stationary: StationaryAnalysis,
    pub levels: Vec<LevelSet>,
}

fn branch_polyline(
    branch: &BranchDescriptor,
    d: f64,
    prob: &EnergyProblem,
    samples: usize,
) -> BranchPolyline {
    let (xa, xb) = match branch.kind {
        BranchKind::Axis | BranchKind::SepInner => (0.0, branch.x0),
        BranchKind::Loop | BranchKind::SepOuter => {
            (branch.x_lo.unwrap_or(branch.x0), branch.x0)
        }
    };
    let mu = prob.mu();
    let m = (samples.max(4) / 2 + 1).max(3);
    let mut upper: Vec<[f64; 2]> = Vec::with_capacity(m);
    for j in 0..m {
        // Chebyshev spacing clusters samples where the curve turns
        let t = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (m - 1) as f64).cos());
        let x = xa + (xb - xa) * t;
        let y = ((d - fhat(x, prob)).max(0.0)).sqrt() / mu;
        upper.push([x, y]);
    }
    let mut points = upper.clone();
    for p in upper.iter().rev().skip(1) {
        points.push([p[0], -p[1]]);
    }
    BranchPolyline {
        descriptor: *branch,
        points,
    }
}

/// Builds the portrait document for a list of levels, with `samples`
/// polyline points per branch.
pub fn portrait(prob: &EnergyProblem, levels: &[f64], samples: usize) -> PhasePortrait {
    let level_sets = levels
        .iter()
        .map(|&d| LevelSet {
            d,
            branches: components(d, prob)
                .iter()
                .map(|b| branch_polyline(b, d, prob, samples))
                .collect(),
        })
        .collect();
    PhasePortrait {
        rho: prob.rho(),
        mu: prob.mu(),
        stationary: stationary_points(prob),
        levels: level_sets,
    }
}
