//! Numerical construction of profile curves: integrate the phase flow in
//! arc length with the angle coordinate alongside, embed into the ambient
//! model, and complete axis-touching arcs by reflection.
//!
//! Conventions shared by every trace:
//! - arc length starts at the widest point of the branch, `x(0) = x0` with
//!   `y(0) = 0` (the inner separatrix arc, which has no such point, starts
//!   just below the saddle instead);
//! - the `y < 0` half is integrated forward in `s` and the `y > 0` half is
//!   its exact mirror (`x` even, `y` and `psi` odd), so the reflection
//!   symmetry of critical curves holds sample-for-sample;
//! - axis-bound arcs stop at `x <= x_cutoff` and append the `x -> 0` limit
//!   sample, where the curvature diverges to negative infinity but the
//!   embedded point and tangent have plain limits.
//!
//! On the sphere the level `d = rho mu^2 e^2` passes through the pole of
//! the angle chart. Those traces integrate the removable singularity of
//! `psi_s` in a cancellation-free form, keep the raw (continuous) `psi` in
//! the samples, and embed with the chart angle shifted by a quarter turn
//! whose sign flips at each pole crossing, which keeps the embedded
//! polyline smooth through the pole.

use crate::energy::EnergyProblem;
use crate::geometry::{embed_phi, reflect_alpha, AmbientPoint};
use crate::num::{adaptive_quad, fmt_g, Integrator};
use crate::phase::{self, BranchDescriptor, BranchKind, PhaseState};
use crate::{Error, Result};
use serde::Serialize;
use std::io::Write;

const E: f64 = std::f64::consts::E;

/// Step control and termination settings for profile traces.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Absolute tolerance of the adaptive integrator.
    pub abs_tol: f64,
    /// Relative tolerance of the adaptive integrator.
    pub rel_tol: f64,
    /// Axis-bound arcs stop when `x` drops below this value.
    pub x_cutoff: f64,
    /// Arc length per side granted to asymptotic (separatrix) arcs.
    pub budget: f64,
    /// Uniform output samples per half-trace.
    pub samples_per_half: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            x_cutoff: 1e-8,
            budget: 50.0,
            samples_per_half: 2048,
        }
    }
}

/// How a traced profile ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    /// Axis-bound arc truncated at the cutoff and closed by limit samples;
    /// the full critical curve continues by reflection.
    Open,
    /// Closed curve obtained by appending the mirror image across the
    /// rotation axis.
    ReflectedClosed,
    /// Arc approaching the saddle (or leaving it) truncated at the
    /// arc-length budget.
    Asymptotic,
    /// Closed orbit sampled over exactly one period.
    Periodic,
}

impl std::fmt::Display for Completion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Completion::Open => "open",
            Completion::ReflectedClosed => "reflected-closed",
            Completion::Asymptotic => "asymptotic",
            Completion::Periodic => "periodic",
        };
        f.write_str(name)
    }
}

/// One arc-length sample of a profile curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// Curve curvature `ln(x) / mu`; negative infinity on axis limit
    /// samples.
    pub kappa: f64,
    /// Raw angle coordinate, odd in `s`.
    pub psi: f64,
    pub point: AmbientPoint,
}

/// A sampled critical-curve branch.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    pub problem: EnergyProblem,
    pub d: f64,
    pub branch: BranchDescriptor,
    /// Samples ordered by `s`.
    pub samples: Vec<CurveSample>,
    pub completion: Completion,
    /// Arc-length period of closed orbits.
    pub period: Option<f64>,
    /// Angle advance over one period of closed orbits.
    pub psi_period: Option<f64>,
    /// Largest relative first-integral drift over the uniform samples.
    pub drift_max: f64,
    /// Whether the trace runs through the chart pole of the sphere.
    pub pole_passing: bool,
    /// Index range of the uniformly spaced samples (excludes appended
    /// limit samples).
    core: (usize, usize),
}

impl ProfileCurve {
    /// The uniformly spaced samples, suitable for finite differencing.
    pub fn uniform_core(&self) -> &[CurveSample] {
        &self.samples[self.core.0..self.core.1]
    }

    /// Arc-length spacing of the uniform core.
    pub fn core_step(&self) -> f64 {
        let c = self.uniform_core();
        if c.len() < 2 {
            0.0
        } else {
            c[1].s - c[0].s
        }
    }
}

/// The pole level `rho mu^2 e^2` of the sphere chart.
pub(crate) fn pole_level_value(prob: &EnergyProblem) -> f64 {
    prob.rho_mu_sq() * E * E
}

/// Rate of the angle coordinate, `x (ln x - 1) / (d - rho mu^2 x^2)`.
///
/// At the pole level the denominator vanishes where `ln x - 1` does; the
/// `pole` form rewrites the quotient through `ln(1 + w) / w` so the
/// removable singularity evaluates to its limit.
fn psi_rate(x: f64, d: f64, prob: &EnergyProblem, pole: bool) -> f64 {
    let q = prob.rho_mu_sq();
    if pole {
        let w = (x - E) / E;
        let lw = if w == 0.0 { 1.0 } else { w.ln_1p() / w };
        -x * lw / (q * E * (E + x))
    } else {
        x * (x.ln() - 1.0) / (d - q * x * x)
    }
}

/// Embeds a profile sample; pole-passing traces shift the chart angle by a
/// quarter turn whose sign `sigma` flips at each pole crossing.
pub(crate) fn embed_point(
    prob: &EnergyProblem,
    d: f64,
    x: f64,
    psi: f64,
    pole: bool,
    sigma: f64,
) -> Result<AmbientPoint> {
    let v = if pole {
        psi + sigma * std::f64::consts::FRAC_PI_2 / (prob.rho() * d).sqrt()
    } else {
        psi
    };
    embed_phi(prob.mu() * x, v, prob.rho(), d)
}

enum Mode {
    AxisCutoff,
    LoopHalf,
    SepBudget,
    SepInnerFall,
}

/// Integrates one branch of the level set `F = d` into a sampled profile
/// curve.
///
/// Axis branches run from the widest point down to the cutoff on both
/// sides and close with the two limit samples. Loop branches detect the
/// return to `y = 0` and cover exactly one period. The outer separatrix
/// arc runs to the arc-length budget on both sides; the inner one starts
/// just below the saddle (its `s = 0` sample is the one exception to the
/// `y(0) = 0` convention) and falls to the axis one-sidedly.
pub fn integrate_profile(
    prob: &EnergyProblem,
    d: f64,
    branch: &BranchDescriptor,
    opts: &TraceOptions,
) -> Result<ProfileCurve> {
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
    let mut branch = canon;
    let mut d = d;

    // pole snap: land exactly on the pole level so the chart shift and the
    // removable-singularity form are consistent to machine precision
    let mut pole = false;
    if prob.rho() > 0.0 {
        let dp = pole_level_value(prob);
        if (d - dp).abs() < 1e-10 * dp.max(1.0) && (branch.x0 - E).abs() < 1e-6 * E {
            pole = true;
            d = dp;
            branch.x0 = E;
        }
    }

    let mode = match branch.kind {
        BranchKind::Axis => Mode::AxisCutoff,
        BranchKind::Loop => Mode::LoopHalf,
        BranchKind::SepOuter => Mode::SepBudget,
        BranchKind::SepInner => Mode::SepInnerFall,
    };

    let mu = prob.mu();
    let start: [f64; 3] = match mode {
        Mode::SepInnerFall => {
            let x_start = branch.x0 * (1.0 - 1e-6);
            let y_start = -((d - phase::fhat(x_start, prob)).max(0.0)).sqrt() / mu;
            [x_start, y_start, 0.0]
        }
        _ => [branch.x0, 0.0, 0.0],
    };

    let prob_c = *prob;
    let rhs = move |_s: f64, st: &[f64; 3]| -> [f64; 3] {
        let x = st[0];
        if x <= 0.0 {
            // continuous extension: x ln^2 x and x ln x vanish at 0
            return [st[1], 0.0, 0.0];
        }
        let (xd, yd) = phase::vector_field(&PhaseState::new(x, st[1]), &prob_c);
        [xd, yd, psi_rate(x, d, &prob_c, pole)]
    };

    // pass 1: locate the end of the forward half
    let mut rk = Integrator::new(opts.abs_tol, opts.rel_tol);
    let s_end = match mode {
        Mode::AxisCutoff | Mode::SepInnerFall => {
            let cap = 4.0 * opts.budget + 100.0;
            let cutoff = opts.x_cutoff;
            let (s, _, hit) = rk
                .integrate_event(&rhs, 0.0, &start, cap, &|_s, st| st[0] - cutoff)
                .map_err(|e| Error::from_num(e, "profile integration"))?;
            if !hit {
                return Err(Error::Tolerance {
                    what: "axis cutoff not reached within the arc-length cap",
                });
            }
            s
        }
        Mode::LoopHalf => {
            let (s, _, hit) = rk
                .integrate_event(&rhs, 0.0, &start, 1e4, &|_s, st| st[1])
                .map_err(|e| Error::from_num(e, "profile integration"))?;
            if !hit {
                return Err(Error::Tolerance {
                    what: "loop half-period not found within the arc-length cap",
                });
            }
            s
        }
        Mode::SepBudget => opts.budget,
    };

    // pass 2: land exactly on a uniform grid
    let n = opts.samples_per_half.max(2);
    let mut rk2 = Integrator::new(opts.abs_tol, opts.rel_tol);
    let mut fwd: Vec<(f64, [f64; 3])> = Vec::with_capacity(n);
    fwd.push((0.0, start));
    let mut state = start;
    let mut s_prev = 0.0;
    for j in 1..n {
        let s_j = s_end * j as f64 / (n - 1) as f64;
        state = rk2
            .advance_to(&rhs, s_prev, &state, s_j)
            .map_err(|e| Error::from_num(e, "profile integration"))?;
        s_prev = s_j;
        fwd.push((s_j, state));
    }

    let make_sample = |s: f64, st: &[f64; 3]| -> Result<CurveSample> {
        let x = st[0].max(0.0);
        let kappa = if x == 0.0 {
            f64::NEG_INFINITY
        } else {
            x.ln() / mu
        };
        Ok(CurveSample {
            s,
            x,
            y: st[1],
            kappa,
            psi: st[2],
            point: embed_point(prob, d, x, st[2], pole, 1.0)?,
        })
    };
    let mirror = |smp: &CurveSample| CurveSample {
        s: -smp.s,
        x: smp.x,
        y: -smp.y,
        kappa: smp.kappa,
        psi: -smp.psi,
        point: reflect_alpha(smp.point),
    };

    let mut forward: Vec<CurveSample> = Vec::with_capacity(n);
    for (s, st) in &fwd {
        forward.push(make_sample(*s, st)?);
    }

    let mirrored = !matches!(mode, Mode::SepInnerFall);
    let mut samples: Vec<CurveSample> = Vec::new();
    if mirrored {
        for smp in forward.iter().skip(1).rev() {
            samples.push(mirror(smp));
        }
    }
    samples.extend(forward.iter().copied());

    // axis limit samples: the remaining arc to the axis is mu x / sqrt(d)
    // and psi has already converged there
    let limit_tail = matches!(mode, Mode::AxisCutoff | Mode::SepInnerFall);
    if limit_tail {
        let last = *samples.last().expect("nonempty");
        let s_lim = last.s + mu * last.x / d.sqrt();
        let tail = CurveSample {
            s: s_lim,
            x: 0.0,
            y: -d.sqrt() / mu,
            kappa: f64::NEG_INFINITY,
            psi: last.psi,
            point: embed_point(prob, d, 0.0, last.psi, pole, 1.0)?,
        };
        samples.push(tail);
        if mirrored {
            samples.insert(0, mirror(&tail));
        }
    }

    let (completion, period, psi_period, core) = match mode {
        Mode::AxisCutoff => (Completion::Open, None, None, (1, samples.len() - 1)),
        Mode::LoopHalf => {
            let psi_end = forward.last().expect("nonempty").psi;
            (
                Completion::Periodic,
                Some(2.0 * s_end),
                Some(2.0 * psi_end),
                (0, samples.len()),
            )
        }
        Mode::SepBudget => (Completion::Asymptotic, None, None, (0, samples.len())),
        Mode::SepInnerFall => (Completion::Asymptotic, None, None, (0, samples.len() - 1)),
    };

    let mut drift_max: f64 = 0.0;
    for smp in &samples[core.0..core.1] {
        let f = phase::f_value(&PhaseState::new(smp.x, smp.y), prob);
        drift_max = drift_max.max((f - d).abs() / d);
    }

    Ok(ProfileCurve {
        problem: *prob,
        d,
        branch,
        samples,
        completion,
        period,
        psi_period,
        drift_max,
        pole_passing: pole,
        core,
    })
}

/// `ln(r) - 1`, evaluated relative to `e` near it; the direct form loses
/// nine digits there to the rounding of the logarithm.
fn ln_m1(r: f64) -> f64 {
    if (r - E).abs() < 0.25 * E {
        ((r - E) / E).ln_1p()
    } else {
        r.ln() - 1.0
    }
}

/// `Q(r) / t^2` where `Q = Fhat(x0) - Fhat(r)` and `r = x0 - t^2`, written
/// without the cancellation of the direct difference; `q = rho mu^2`,
/// `l0 = ln(x0) - 1`.
fn q_over_t2(x0: f64, l0: f64, r: f64, t2: f64, q: f64) -> f64 {
    let l = ln_m1(r);
    let ab_over_t2 = if t2 == 0.0 {
        1.0 + l
    } else {
        l - x0 * (-t2 / x0).ln_1p() / t2
    };
    q * (x0 + r) + ab_over_t2 * (x0 * l0 + r * l)
}

fn quad_knots(prob: &EnergyProblem, x0: f64) -> Vec<f64> {
    let tmax = x0.sqrt();
    let mut knots = vec![(x0 / 2.0).sqrt()];
    // geometric cascade toward t = 0: levels close to the pole level
    // concentrate a boundary layer of width down to ~1e-7 tmax there
    for k in 1..=12 {
        knots.push(tmax * 10f64.powi(-k));
    }
    let mut push_r = |r: f64| {
        if r > 0.0 && r < x0 {
            knots.push((x0 - r).sqrt());
        }
    };
    push_r(E);
    if let Some((xm, xp)) = phase::saddle_centre(prob) {
        push_r(xm);
        push_r(xp);
    }
    knots
}

/// The junction angle `psi(0)`: the limit of the angle coordinate at the
/// rotation axis, as an improper integral over the axis branch from its
/// widest point `x0` down to `x = 0`.
///
/// The substitution `r = x0 - t^2` removes the square-root endpoint
/// singularity at `x0`; near that endpoint the level difference is
/// evaluated in a cancellation-free form. The integrand vanishes at the
/// axis endpoint like `r ln r`.
pub fn psi_at_zero(prob: &EnergyProblem, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NotPositive {
            name: "level d",
            value: d,
        });
    }
    let comps = phase::components(d, prob);
    let axis = comps.iter().find(|b| b.kind == BranchKind::Axis);
    let Some(axis) = axis else {
        // separatrix level: the saddle is a double root and the angle
        // integral has a logarithmic blowup
        return Err(Error::SeparatrixDivergence { d });
    };
    let x0 = axis.x0;
    if prob.rho() > 0.0 {
        let dp = pole_level_value(prob);
        if (d - dp).abs() < 1e-10 * dp.max(1.0) && (x0 - E).abs() < 1e-6 * E {
            return Err(Error::PoleLevel { d });
        }
    }
    let q = prob.rho_mu_sq();
    let l0 = ln_m1(x0);
    let integrand = |t: f64| -> f64 {
        let t2 = t * t;
        let r = x0 - t2;
        if r <= 0.0 {
            return 0.0;
        }
        let l = ln_m1(r);
        // d - q r^2 = x0^2 L0^2 + q t^2 (x0 + r): cancellation-free on the
        // sphere, where near-pole levels make the direct difference vanish
        let dd = if q > 0.0 {
            x0 * x0 * l0 * l0 + q * t2 * (x0 + r)
        } else {
            d - q * r * r
        };
        if r >= 0.5 * x0 {
            let qpt = q_over_t2(x0, l0, r, t2, q);
            if qpt <= 0.0 {
                return 0.0;
            }
            2.0 * r * l / (dd * qpt.sqrt())
        } else {
            let qq = d - phase::fhat(r, prob);
            if qq <= 0.0 {
                return 0.0;
            }
            2.0 * t * r * l / (dd * qq.sqrt())
        }
    };
    let knots = quad_knots(prob, x0);
    let i = adaptive_quad(&integrand, 0.0, x0.sqrt(), &knots, 1e-12, 1e-14)
        .map_err(|e| Error::from_num(e, "junction angle quadrature"))?;
    Ok(-prob.mu() * i)
}

/// The junction angle of the pole-passing axis trace on the sphere, where
/// the widest point is the pole abscissa `x0 = e` and the chart factor
/// `d - rho mu^2 x^2` vanishes at the endpoint together with `ln x - 1`.
///
/// Both vanishing factors cancel against the substitution `r = e - t^2`,
/// leaving a bounded integrand. Below the critical index where the
/// separatrix level rises above the pole level, the pole sits on the loop
/// branch and no axis-to-pole angle exists.
pub fn pole_psi(prob: &EnergyProblem) -> Result<f64> {
    if prob.rho() <= 0.0 {
        return Err(Error::RequiresSphere { rho: prob.rho() });
    }
    let dp = pole_level_value(prob);
    if let Some(sep) = phase::separatrix_level(prob) {
        if sep > dp * (1.0 + 1e-12) {
            return Err(Error::PoleOnLoop { mu: prob.mu() });
        }
    }
    let q = prob.rho_mu_sq();
    let integrand = |t: f64| -> f64 {
        let t2 = t * t;
        let r = E - t2;
        if r <= 0.0 {
            return 0.0;
        }
        // L / t^2 with L = ln r - 1 = ln(1 - t^2 / e)
        let l_over_t2 = if t2 == 0.0 {
            -1.0 / E
        } else {
            (-t2 / E).ln_1p() / t2
        };
        if r >= 0.5 * E {
            let qpt = q_over_t2(E, 0.0, r, t2, q);
            if qpt <= 0.0 {
                return 0.0;
            }
            2.0 * r * l_over_t2 / (q * (E + r) * qpt.sqrt())
        } else {
            let l = r.ln() - 1.0;
            let dd = q * (E * E - r * r);
            let qq = dp - phase::fhat(r, prob);
            if qq <= 0.0 {
                return 0.0;
            }
            2.0 * t * r * l / (dd * qq.sqrt())
        }
    };
    let knots = quad_knots(prob, E);
    let i = adaptive_quad(&integrand, 0.0, E.sqrt(), &knots, 1e-12, 1e-14)
        .map_err(|e| Error::from_num(e, "pole angle quadrature"))?;
    Ok(-prob.mu() * i)
}

/// Closes an axis-bound trace by appending its mirror image across the
/// rotation axis.
///
/// The junction tangents agree because the curve meets the axis
/// orthogonally from both sides, so the result is a closed C1 curve; the
/// curvature still diverges at the two junctions, so it is not C2 there.
/// Already-reflected input is returned unchanged.
pub fn reflect_complete(curve: &ProfileCurve) -> Result<ProfileCurve> {
    if curve.completion == Completion::ReflectedClosed {
        return Ok(curve.clone());
    }
    if curve.branch.kind != BranchKind::Axis || curve.completion != Completion::Open {
        return Err(Error::NotAxisBranch {
            got: format!("{} ({})", curve.branch.kind, curve.completion),
        });
    }
    let s_end = curve.samples.last().expect("nonempty").s;
    let mut samples = curve.samples.clone();
    for src in curve.samples.iter().rev().skip(1) {
        samples.push(CurveSample {
            s: 2.0 * s_end - src.s,
            x: src.x,
            y: -src.y,
            kappa: src.kappa,
            psi: src.psi,
            point: [-src.point[0], src.point[1], src.point[2]],
        });
    }
    Ok(ProfileCurve {
        problem: curve.problem,
        d: curve.d,
        branch: curve.branch,
        samples,
        completion: Completion::ReflectedClosed,
        period: None,
        psi_period: None,
        drift_max: curve.drift_max,
        pole_passing: curve.pole_passing,
        core: curve.core,
    })
}

/// Writes the sample table as CSV with full round-trip precision.
pub fn write_curve_csv<W: Write>(curve: &ProfileCurve, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "s,x,y,kappa,psi,px,py,pz")?;
    for smp in &curve.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_g(smp.s, 17),
            fmt_g(smp.x, 17),
            fmt_g(smp.y, 17),
            fmt_g(smp.kappa, 17),
            fmt_g(smp.psi, 17),
            fmt_g(smp.point[0], 17),
            fmt_g(smp.point[1], 17),
            fmt_g(smp.point[2], 17)
        )?;
    }
    Ok(())
}

/// Metadata document accompanying a curve CSV.
pub fn sidecar(curve: &ProfileCurve, curve_type: &str) -> serde_json::Value {
    serde_json::json!({
        "rho": curve.problem.rho(),
        "mu": curve.problem.mu(),
        "d": curve.d,
        "branch": curve.branch.kind.to_string(),
        "type": curve_type,
        "completion": curve.completion.to_string(),
        "period": curve.period,
        "drift_max": curve.drift_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::components;

    fn prob(mu: f64, rho: f64) -> EnergyProblem {
        EnergyProblem::new(mu, rho).unwrap()
    }

    fn trace(mu: f64, rho: f64, d: f64, kind: BranchKind) -> ProfileCurve {
        let p = prob(mu, rho);
        let branch = components(d, &p)
            .into_iter()
            .find(|b| b.kind == kind)
            .expect("branch exists");
        integrate_profile(&p, d, &branch, &TraceOptions::default()).unwrap()
    }

    #[test]
    fn oval_trace_structure() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Axis);
        assert_eq!(c.completion, Completion::Open);
        assert!(!c.pole_passing);
        // 2 * 2048 - 1 uniform samples plus the two limit samples
        assert_eq!(c.samples.len(), 2 * 2048 + 1);
        assert_eq!(c.uniform_core().len(), 2 * 2048 - 1);
        let mid = &c.samples[c.samples.len() / 2];
        assert_eq!(mid.s, 0.0);
        assert!((mid.x - 0.3402888544641764).abs() < 1e-12);
        assert_eq!(mid.y, 0.0);
        assert_eq!(mid.psi, 0.0);
        // limit samples close the arc on the rotation axis
        let first = &c.samples[0];
        let last = &c.samples[c.samples.len() - 1];
        assert_eq!(first.x, 0.0);
        assert_eq!(last.x, 0.0);
        assert_eq!(first.kappa, f64::NEG_INFINITY);
        assert!((last.y + 0.5f64.sqrt() / 1.0).abs() < 1e-12);
        assert!((first.y - 0.5f64.sqrt() / 1.0).abs() < 1e-12);
        assert_eq!(first.point[0], 0.0);
        assert!(c.drift_max < 1e-8, "drift {}", c.drift_max);
        // samples are ordered and kappa matches ln(x)/mu on the core
        for w in c.samples.windows(2) {
            assert!(w[1].s > w[0].s);
        }
        for smp in c.uniform_core() {
            assert_eq!(smp.kappa, smp.x.ln() / 1.0);
        }
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        let c = trace(1.0, 0.0, 1.5, BranchKind::Axis);
        let m = c.samples.len();
        for i in 0..m {
            let a = &c.samples[i];
            let b = &c.samples[m - 1 - i];
            assert_eq!(a.s, -b.s);
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, -b.y);
            assert_eq!(a.psi, -b.psi);
            assert_eq!(a.point[0], b.point[0]);
            assert_eq!(a.point[1], -b.point[1]);
            assert_eq!(a.point[2], b.point[2]);
        }
    }

    #[test]
    fn trace_end_angle_matches_quadrature() {
        for (mu, rho, d) in [
            (1.0, 0.0, 0.5),
            (1.0, 0.0, 1.5),
            (1.0, 0.0, 3.5),
            (0.25, 1.0, 1.5),
            (1.0, -1.0, 0.6),
        ] {
            let c = trace(mu, rho, d, BranchKind::Axis);
            let psi_end = c.samples.last().unwrap().psi;
            let psi0 = psi_at_zero(&prob(mu, rho), d).unwrap();
            assert!(
                (psi_end + psi0).abs() < 1e-7,
                "mu={mu} rho={rho} d={d}: trace {psi_end} vs quadrature {psi0}"
            );
        }
    }

    #[test]
    fn junction_angles_match_reference_values() {
        let cases: [(f64, f64, f64, f64); 9] = [
            (1.0, 0.0, 0.5, 0.99559261507789977),
            (1.0, 0.0, 1.5, 0.78447778511540036),
            (1.0, 0.0, 3.5, -0.076718520273946945),
            (0.25, 1.0, 0.95, 0.37627948554303006),
            (0.25, 1.0, 1.5, 0.21677497642872557),
            (0.25, 1.0, 4.0, -0.031755208240194321),
            (1.0, -1.0, 0.3, 1.2188276066253155),
            (1.0, -1.0, 0.6, 1.8159500267911645),
            (1.0, -1.0, 8.0, -0.062406167562809378),
        ];
        for (mu, rho, d, want) in cases {
            let got = psi_at_zero(&prob(mu, rho), d).unwrap();
            assert!(
                (got - want).abs() < 1e-11 * want.abs().max(1.0),
                "mu={mu} rho={rho} d={d}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn junction_angle_rejects_special_levels() {
        assert!(matches!(
            psi_at_zero(&prob(1.0, 0.0), 1.0),
            Err(Error::SeparatrixDivergence { .. })
        ));
        let p = prob(1.0, 1.0);
        let dp = E * E;
        assert!(matches!(
            psi_at_zero(&p, dp),
            Err(Error::PoleLevel { .. })
        ));
    }

    #[test]
    fn junction_angle_near_pole_level() {
        // the angle jumps by a quarter turn of the chart across the pole
        // level; these values sit 1e-7 away on each side
        let p = prob(0.6, 1.0);
        let dp = pole_level_value(&p);
        let above = psi_at_zero(&p, dp * (1.0 + 1e-7)).unwrap();
        let below = psi_at_zero(&p, dp * (1.0 - 1e-7)).unwrap();
        assert!((above + 0.1409517912691834).abs() < 1e-9, "got {above}");
        assert!((below - 1.7852605755017073).abs() < 1e-9, "got {below}");
    }

    #[test]
    fn pole_angles_match_reference_values() {
        let cases: [(f64, f64); 5] = [
            (0.42, 2.5071988896853876),
            (0.499, 1.3209561809028734),
            (0.54, 1.0674467276349717),
            (0.6, 0.82215434396094874),
            (1.0, 0.26679644909083747),
        ];
        for (mu, want) in cases {
            let got = pole_psi(&prob(mu, 1.0)).unwrap();
            assert!(
                (got - want).abs() < 1e-11 * want.max(1.0),
                "mu={mu}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn pole_angle_rejects_loop_regime_and_flat() {
        assert!(matches!(
            pole_psi(&prob(0.15, 1.0)),
            Err(Error::PoleOnLoop { .. })
        ));
        assert!(matches!(
            pole_psi(&prob(0.35, 1.0)),
            Err(Error::PoleOnLoop { .. })
        ));
        assert!(matches!(
            pole_psi(&prob(1.0, 0.0)),
            Err(Error::RequiresSphere { .. })
        ));
    }

    #[test]
    fn loop_traces_recover_period_and_angle_advance() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Loop);
        assert_eq!(c.completion, Completion::Periodic);
        assert!((c.period.unwrap() - 6.8883822013924313).abs() < 1e-8);
        assert!((c.psi_period.unwrap() + 1.5598724032975904).abs() < 1e-8);
        assert!(c.drift_max < 1e-8);
        // x stays inside the loop interval
        for smp in &c.samples {
            assert!(smp.x >= 1.8577756506280144 * (1.0 - 1e-9));
            assert!(smp.x <= 3.3558599939527319 * (1.0 + 1e-9));
        }

        let c = trace(0.25, 1.0, 0.95, BranchKind::Loop);
        assert!((c.period.unwrap() - 2.0990441475597351).abs() < 1e-8);
        assert!((c.psi_period.unwrap().abs() - 0.68325341033681096).abs() < 1e-8);

        let c = trace(1.0, -1.0, 0.3, BranchKind::Loop);
        assert!((c.period.unwrap() - 6.9374416612122909).abs() < 1e-8);
        assert!((c.psi_period.unwrap().abs() - 1.8627173839514648).abs() < 1e-8);
    }

    #[test]
    fn separatrix_outer_trace_approaches_the_saddle() {
        // the root of the level equation carries ~1e-13 of error, so the
        // traced orbit passes the saddle at distance ~1e-6 and departs
        // again after ~20 arc-length units; the guaranteed behavior is the
        // close approach, not the endpoint
        let c = trace(1.0, 0.0, 1.0, BranchKind::SepOuter);
        assert_eq!(c.completion, Completion::Asymptotic);
        let last = c.samples.last().unwrap();
        assert_eq!(last.s, 50.0);
        let closest = c
            .samples
            .iter()
            .map(|s| (s.x - 1.0).abs().max(s.y.abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-5, "closest saddle approach {closest}");
        // the orbit never leaves the level set of its branch
        for smp in &c.samples {
            assert!(smp.x <= 3.5911214766686221 * (1.0 + 1e-9));
            assert!(smp.x > 0.0);
        }
        assert!(c.drift_max < 1e-8);
    }

    #[test]
    fn separatrix_inner_trace_falls_to_the_axis() {
        let c = trace(1.0, 0.0, 1.0, BranchKind::SepInner);
        assert_eq!(c.completion, Completion::Asymptotic);
        // one-sided: starts just below the saddle with y < 0
        let first = &c.samples[0];
        assert_eq!(first.s, 0.0);
        assert!(first.x < 1.0 && first.x > 1.0 - 1e-5);
        assert!(first.y < 0.0);
        let last = c.samples.last().unwrap();
        assert_eq!(last.x, 0.0);
        assert_eq!(last.kappa, f64::NEG_INFINITY);
    }

    #[test]
    fn pole_axis_trace_runs_through_the_pole() {
        let p = prob(1.0, 1.0);
        let dp = pole_level_value(&p);
        let branch = components(dp, &p).into_iter().next().unwrap();
        assert_eq!(branch.kind, BranchKind::Axis);
        let c = integrate_profile(&p, dp, &branch, &TraceOptions::default()).unwrap();
        assert!(c.pole_passing);
        assert_eq!(c.d, dp);
        let mid = &c.samples[c.samples.len() / 2];
        assert_eq!(mid.x, E);
        // the widest point is the chart pole itself
        assert!((mid.point[0] - 1.0).abs() < 1e-12);
        assert!(mid.point[1].abs() < 1e-12);
        assert!(mid.point[2].abs() < 1e-12);
        // raw angle at the axis end agrees with the pole quadrature
        let psi_end = c.samples.last().unwrap().psi;
        let raw = pole_psi(&p).unwrap();
        assert!((psi_end + raw).abs() < 1e-7, "{psi_end} vs {raw}");
        assert!(c.drift_max < 1e-8);
        // embedded samples stay on the sphere
        for smp in &c.samples {
            let r = crate::geometry::model_residual(smp.point, 1.0);
            assert!(r < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn pole_loop_trace_matches_reference_period() {
        let p = prob(0.15, 1.0);
        let dp = pole_level_value(&p);
        let branch = components(dp, &p)
            .into_iter()
            .find(|b| b.kind == BranchKind::Loop)
            .unwrap();
        let c = integrate_profile(&p, dp, &branch, &TraceOptions::default()).unwrap();
        assert!(c.pole_passing);
        assert!((c.period.unwrap() - 0.96553383157411204).abs() < 1e-8);
        assert!((c.psi_period.unwrap().abs() - 7.8922355884615571).abs() < 2e-8);
    }

    #[test]
    fn psi_decreases_below_e_and_increases_above() {
        let c = trace(1.0, 0.0, 1.5, BranchKind::Axis);
        // forward half: x decreasing from x0 > e through e toward 0
        let core = c.uniform_core();
        let half = &core[core.len() / 2..];
        for w in half.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.x > E && b.x > E {
                assert!(b.psi > a.psi, "angle should grow while x > e");
            }
            if a.x < E && b.x < E && a.x > 1e-3 {
                assert!(b.psi < a.psi, "angle should shrink while x < e");
            }
        }
    }

    #[test]
    fn reflection_closes_the_curve() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Axis);
        let r = reflect_complete(&c).unwrap();
        assert_eq!(r.completion, Completion::ReflectedClosed);
        assert_eq!(r.samples.len(), 2 * c.samples.len() - 1);
        let first = r.samples.first().unwrap();
        let last = r.samples.last().unwrap();
        assert_eq!(first.point, last.point);
        // tangent continuity at the junction: the edges across it are
        // parallel within the sampling resolution
        let k = c.samples.len();
        let a = &r.samples[k - 2];
        let b = &r.samples[k - 1];
        let c2 = &r.samples[k];
        let e1 = [b.point[0] - a.point[0], b.point[1] - a.point[1]];
        let e2 = [c2.point[0] - b.point[0], c2.point[1] - b.point[1]];
        let cross = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        let dot = e1[0] * e2[0] + e1[1] * e2[1];
        assert!(dot > 0.0);
        assert!(cross / dot < 1e-3);
        // idempotent on reflected input
        let r2 = reflect_complete(&r).unwrap();
        assert_eq!(r2.samples.len(), r.samples.len());
    }

    #[test]
    fn reflection_total_turning_is_one_loop() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Axis);
        let r = reflect_complete(&c).unwrap();
        // signed turning of the closed planar polyline
        let pts: Vec<[f64; 2]> = r
            .samples
            .iter()
            .map(|s| [s.point[0], s.point[1]])
            .collect();
        let m = pts.len() - 1;
        let mut total = 0.0;
        for i in 0..m {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            let c2 = pts[(i + 2) % m];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c2[0] - b[0], c2[1] - b[1]];
            total += (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]);
        }
        assert!(
            (total.abs() - 2.0 * std::f64::consts::PI).abs() < 0.05,
            "total turning {total}"
        );
    }

    #[test]
    fn reflection_rejects_non_axis_branches() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Loop);
        assert!(matches!(
            reflect_complete(&c),
            Err(Error::NotAxisBranch { .. })
        ));
    }

    #[test]
    fn trace_rejects_missing_branch() {
        let p = prob(1.0, 0.0);
        let fake = BranchDescriptor {
            kind: BranchKind::Loop,
            x0: 4.0,
            x_lo: Some(3.0),
        };
        // d = 1.5 has a single axis component
        assert!(matches!(
            integrate_profile(&p, 1.5, &fake, &TraceOptions::default()),
            Err(Error::NoSuchBranch { .. })
        ));
    }

    #[test]
    fn csv_round_trips_behind_full_precision() {
        let mut opts = TraceOptions::default();
        opts.samples_per_half = 16;
        let p = prob(1.0, 0.0);
        let branch = components(0.5, &p).into_iter().next().unwrap();
        let c = integrate_profile(&p, 0.5, &branch, &opts).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,x,y,kappa,psi,px,py,pz");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), c.samples.len());
        for (row, smp) in rows.iter().zip(&c.samples) {
            let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals.len(), 8);
            assert_eq!(vals[0].to_bits(), smp.s.to_bits());
            assert_eq!(vals[1].to_bits(), smp.x.to_bits());
            assert_eq!(vals[3].to_bits(), smp.kappa.to_bits());
            assert_eq!(vals[7].to_bits(), smp.point[2].to_bits());
        }
    }

    #[test]
    fn sidecar_carries_the_metadata() {
        let c = trace(1.0, 0.0, 0.5, BranchKind::Loop);
        let v = sidecar(&c, "orbit-like");
        assert_eq!(v["rho"], 0.0);
        assert_eq!(v["branch"], "loop");
        assert_eq!(v["type"], "orbit-like");
        assert_eq!(v["completion"], "periodic");
        assert!(v["period"].as_f64().unwrap() > 6.0);
    }
}
