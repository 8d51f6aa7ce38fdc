//! Rotational surfaces swept by profile curves, their curvature
//! verification, and mesh export.
//!
//! Revolving a profile curve about the axis geodesic produces a surface
//! whose principal curvatures at a point depend only on the profile
//! curvature there: `k1 = -kappa` along the profile and `k2 = -kappa +
//! 1/mu` along the orbit circle, so the skew curvature `k2 - k1` is the
//! constant `1/mu`. For `rho = 0` the surface lives in 3-space; otherwise
//! it lives on the model quadric in 4-space and any 3-space image is a
//! lossy projection kept out of the stored data.

use std::io::Write;
use std::thread;

use serde_json::json;

use crate::energy::{self, EnergyProblem};
use crate::geometry;
use crate::num::fmt_g;
use crate::phase::BranchDescriptor;
use crate::trace::{embed_point, Completion, ProfileCurve};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Squared geodesic curvature of the orbit circle through a point of
/// profile curvature `kappa`: `d / (mu^2 exp(2 mu kappa)) - rho`.
/// Positive levels keep it above `-rho`, so every orbit is a circle.
pub fn orbit_curvature_sq(kappa: f64, prob: &EnergyProblem, d: f64) -> f64 {
    let v = flow_velocity(kappa, prob);
    d / (v * v) - prob.rho()
}

/// Speed `mu * exp(mu kappa)` of the rotation flow along the orbit
/// through a point of profile curvature `kappa`; equals `sqrt(d)` times
/// the axis distance of the point.
pub fn flow_velocity(kappa: f64, prob: &EnergyProblem) -> f64 {
    prob.mu() * (prob.mu() * kappa).exp()
}

/// Mesh face; indices are zero-based vertex positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Tri([usize; 3]),
    Quad([usize; 4]),
}

/// One orbit ring of the mesh and the profile data that generated it.
#[derive(Debug, Clone, Copy)]
pub struct RingInfo {
    pub s: f64,
    pub x: f64,
    pub kappa: f64,
    pub psi: f64,
    /// Index of the first vertex of the ring.
    pub first_vertex: usize,
    /// Number of vertices: the angular sample count, or 1 on the axis.
    pub count: usize,
    /// Ring collapsed to a single axis vertex.
    pub degenerate: bool,
}

/// Surface of revolution sampled as rings of vertices with per-vertex
/// curvature data. Vertices are 4-vectors; the flat case uses the first
/// three components and keeps the fourth at zero.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub problem: EnergyProblem,
    pub d: f64,
    pub branch: BranchDescriptor,
    pub slices: usize,
    pub periods: usize,
    pub vertices: Vec<[f64; 4]>,
    pub faces: Vec<Face>,
    pub rings: Vec<RingInfo>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub skew_residual: Vec<f64>,
    pub orbit_curvature_sq: Vec<f64>,
}

struct RingSource {
    s: f64,
    x: f64,
    kappa: f64,
    psi: f64,
    sigma: f64,
}

fn rotate(p: geometry::AmbientPoint, theta: f64, rho: f64) -> [f64; 4] {
    let (sin, cos) = theta.sin_cos();
    if rho == 0.0 {
        [p[0] * cos, p[0] * sin, p[1], 0.0]
    } else {
        [p[0] * cos, p[0] * sin, p[1], p[2]]
    }
}

/// Sweeps the profile curve around the axis geodesic into a mesh with
/// `slices` uniform angular samples per ring. Periodic profiles may be
/// extended to several curvature periods before sweeping; rings on the
/// axis collapse to single vertices closed by triangle fans.
pub fn revolve(curve: &ProfileCurve, slices: usize, periods: usize) -> Result<SurfaceMesh> {
    if slices < 3 {
        return Err(Error::TooFewSlices { got: slices });
    }
    if periods == 0 {
        return Err(Error::NotPositive {
            name: "periods",
            value: 0.0,
        });
    }
    if curve.completion == Completion::ReflectedClosed {
        return Err(Error::ReflectedProfile);
    }
    if periods > 1 && curve.completion != Completion::Periodic {
        return Err(Error::NotPeriodic {
            got: curve.completion.to_string(),
        });
    }
    let prob = &curve.problem;
    let rho = prob.rho();
    for smp in &curve.samples {
        let res = geometry::model_residual(smp.point, rho);
        let scale = if rho == 0.0 { 1.0 } else { 1.0 / rho.abs() };
        if !res.is_finite() || res > 1e-6 * scale.max(1.0) {
            return Err(Error::Tolerance {
                what: "profile model constraint",
            });
        }
    }

    // period extension: copy k shifts s by k periods and the angle by k
    // angle advances; on pole-passing loops the chart side alternates
    // because the curve crosses the pole once per period
    let mut sources: Vec<RingSource> = Vec::new();
    let n = curve.samples.len();
    let period = curve.period.unwrap_or(0.0);
    let psi_period = curve.psi_period.unwrap_or(0.0);
    for k in 0..periods {
        let start = if k == 0 { 0 } else { 1 };
        let flip = if k % 2 == 0 { 1.0 } else { -1.0 };
        for smp in &curve.samples[start..n] {
            let sigma = if smp.s < 0.0 { -1.0 } else { 1.0 };
            sources.push(RingSource {
                s: smp.s + k as f64 * period,
                x: smp.x,
                kappa: smp.kappa,
                psi: smp.psi + k as f64 * psi_period,
                sigma: sigma * flip,
            });
        }
    }

    let mut rings: Vec<RingInfo> = Vec::with_capacity(sources.len());
    let mut first_vertex = 0usize;
    for src in &sources {
        let degenerate = src.x == 0.0;
        let count = if degenerate { 1 } else { slices };
        rings.push(RingInfo {
            s: src.s,
            x: src.x,
            kappa: src.kappa,
            psi: src.psi,
            first_vertex,
            count,
            degenerate,
        });
        first_vertex += count;
    }
    let total = first_vertex;

    let mut vertices = vec![[0.0f64; 4]; total];
    let mut k1 = vec![0.0f64; total];
    let mut k2 = vec![0.0f64; total];
    let mut skew_residual = vec![0.0f64; total];
    let mut orbit_sq = vec![0.0f64; total];

    let fill_ring = |ring: &RingInfo,
                     src: &RingSource,
                     verts: &mut [[f64; 4]],
                     k1: &mut [f64],
                     k2: &mut [f64],
                     skew: &mut [f64],
                     orb: &mut [f64]|
     -> Result<()> {
        let p = embed_point(
            prob,
            curve.d,
            src.x,
            src.psi,
            curve.pole_passing,
            src.sigma,
        )?;
        let pc = energy::principal_curvatures_from_profile(ring.kappa, prob);
        let skew_val = ((pc.k2 - pc.k1) - 1.0 / prob.mu()).abs();
        let orb_val = orbit_curvature_sq(ring.kappa, prob, curve.d);
        if ring.degenerate {
            verts[0] = rotate([0.0, p[1], p[2]], 0.0, rho);
        } else {
            for (j, v) in verts.iter_mut().enumerate() {
                *v = rotate(p, TAU * j as f64 / slices as f64, rho);
            }
        }
        for j in 0..ring.count {
            k1[j] = pc.k1;
            k2[j] = pc.k2;
            skew[j] = skew_val;
            orb[j] = orb_val;
        }
        Ok(())
    };

    // rings are independent; workers own disjoint vertex ranges
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(rings.len().div_ceil(64).max(1));
    if workers <= 1 {
        for (ring, src) in rings.iter().zip(&sources) {
            let lo = ring.first_vertex;
            let hi = lo + ring.count;
            fill_ring(
                ring,
                src,
                &mut vertices[lo..hi],
                &mut k1[lo..hi],
                &mut k2[lo..hi],
                &mut skew_residual[lo..hi],
                &mut orbit_sq[lo..hi],
            )?;
        }
    } else {
        let chunk = rings.len().div_ceil(workers);
        let results = thread::scope(|scope| {
            let mut handles = Vec::new();
            let mut v_rest = vertices.as_mut_slice();
            let mut k1_rest = k1.as_mut_slice();
            let mut k2_rest = k2.as_mut_slice();
            let mut sk_rest = skew_residual.as_mut_slice();
            let mut or_rest = orbit_sq.as_mut_slice();
            for group in rings.chunks(chunk).zip(sources.chunks(chunk)) {
                let nverts: usize = group.0.iter().map(|r| r.count).sum();
                let (v, vr) = v_rest.split_at_mut(nverts);
                let (a, ar) = k1_rest.split_at_mut(nverts);
                let (b, br) = k2_rest.split_at_mut(nverts);
                let (c, cr) = sk_rest.split_at_mut(nverts);
                let (o, orr) = or_rest.split_at_mut(nverts);
                v_rest = vr;
                k1_rest = ar;
                k2_rest = br;
                sk_rest = cr;
                or_rest = orr;
                let base = group.0[0].first_vertex;
                handles.push(scope.spawn(move || -> Result<()> {
                    for (ring, src) in group.0.iter().zip(group.1) {
                        let lo = ring.first_vertex - base;
                        let hi = lo + ring.count;
                        fill_ring(
                            ring,
                            src,
                            &mut v[lo..hi],
                            &mut a[lo..hi],
                            &mut b[lo..hi],
                            &mut c[lo..hi],
                            &mut o[lo..hi],
                        )?;
                    }
                    Ok(())
                }));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("mesh worker panicked"))
                .collect::<Vec<_>>()
        });
        for r in results {
            r?;
        }
    }

    let mut faces = Vec::new();
    for w in rings.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        match (a.degenerate, b.degenerate) {
            (false, false) => {
                for j in 0..slices {
                    let jn = (j + 1) % slices;
                    faces.push(Face::Quad([
                        a.first_vertex + j,
                        b.first_vertex + j,
                        b.first_vertex + jn,
                        a.first_vertex + jn,
                    ]));
                }
            }
            (true, false) => {
                for j in 0..slices {
                    let jn = (j + 1) % slices;
                    faces.push(Face::Tri([
                        a.first_vertex,
                        b.first_vertex + j,
                        b.first_vertex + jn,
                    ]));
                }
            }
            (false, true) => {
                for j in 0..slices {
                    let jn = (j + 1) % slices;
                    faces.push(Face::Tri([
                        a.first_vertex + j,
                        b.first_vertex,
                        a.first_vertex + jn,
                    ]));
                }
            }
            (true, true) => {}
        }
    }

    Ok(SurfaceMesh {
        problem: *prob,
        d: curve.d,
        branch: curve.branch,
        slices,
        periods,
        vertices,
        faces,
        rings,
        k1,
        k2,
        skew_residual,
        orbit_curvature_sq: orbit_sq,
    })
}

/// Axis ring flagged in a verification report: the surface is tangent
/// continuous there but the profile curvature diverges.
#[derive(Debug, Clone, Copy)]
pub struct FlaggedRing {
    pub ring: usize,
    /// Largest angle between an apex secant and the orbit plane.
    pub tangent_kink: f64,
}

/// Residual maxima and curvature fields of a generated mesh.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    /// Max `|(k2 - k1) - 1/mu|` over vertices off the axis.
    pub max_skew_residual: f64,
    /// Max distance of a vertex from the model quadric.
    pub max_model_residual: f64,
    /// Max `|V_ss + (kappa^2 - kappa/mu + rho) V|` for the flow speed
    /// `V = mu x`, finite-differenced over uniformly spaced rings.
    pub max_reduction_residual: f64,
    /// Max `|H^2 - K + rho - 1/(4 mu^2)|` over vertices off the axis.
    pub max_identity_residual: f64,
    /// Vertices off the axis where the principal curvatures coincide.
    pub umbilic_vertices: usize,
    /// Axis rings, with their tangent-plane deviation.
    pub flagged_rings: Vec<FlaggedRing>,
    /// Per-vertex mean curvature `(k1 + k2) / 2`.
    pub mean_curvature: Vec<f64>,
    /// Per-vertex Gauss curvature `k1 k2 + rho`.
    pub gauss_curvature: Vec<f64>,
}

fn model_residual_4(v: [f64; 4], rho: f64) -> f64 {
    if rho == 0.0 {
        v[3].abs()
    } else if rho > 0.0 {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3] - 1.0 / rho).abs()
    } else if v[3] <= 0.0 {
        f64::INFINITY
    } else {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - v[3] * v[3] - 1.0 / rho).abs()
    }
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Checks the invariants of a generated mesh. Axis rings are excluded
/// from the curvature maxima and flagged with their tangent-plane
/// deviation instead, since the profile curvature diverges there while
/// the surface stays tangent continuous.
pub fn verify_surface(mesh: &SurfaceMesh) -> VerificationReport {
    let prob = &mesh.problem;
    let rho = prob.rho();
    let mu = prob.mu();
    let nv = mesh.vertices.len();

    let mut mean_curvature = vec![f64::NAN; nv];
    let mut gauss_curvature = vec![f64::NAN; nv];

    // per-vertex work splits into disjoint chunks, one worker each
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(nv.div_ceil(4096).max(1));
    let chunk = nv.div_ceil(workers);
    let degenerate: Vec<bool> = {
        let mut flags = vec![false; nv];
        for ring in &mesh.rings {
            if ring.degenerate {
                flags[ring.first_vertex] = true;
            }
        }
        flags
    };
    struct ChunkMax {
        skew: f64,
        model: f64,
        identity: f64,
        umbilic: usize,
    }
    let maxima = thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut h_rest = mean_curvature.as_mut_slice();
        let mut k_rest = gauss_curvature.as_mut_slice();
        let mut base = 0usize;
        while base < nv {
            let len = chunk.min(nv - base);
            let (h_mine, hr) = h_rest.split_at_mut(len);
            let (k_mine, kr) = k_rest.split_at_mut(len);
            h_rest = hr;
            k_rest = kr;
            let lo = base;
            base += len;
            let degenerate = &degenerate;
            handles.push(scope.spawn(move || {
                let mut m = ChunkMax {
                    skew: 0.0,
                    model: 0.0,
                    identity: 0.0,
                    umbilic: 0,
                };
                for i in 0..len {
                    let v = lo + i;
                    m.model = m.model.max(model_residual_4(mesh.vertices[v], rho));
                    if degenerate[v] {
                        continue;
                    }
                    let (k1, k2) = (mesh.k1[v], mesh.k2[v]);
                    let h = 0.5 * (k1 + k2);
                    let k = k1 * k2 + rho;
                    h_mine[i] = h;
                    k_mine[i] = k;
                    m.skew = m.skew.max(mesh.skew_residual[v]);
                    m.identity = m
                        .identity
                        .max((h * h - k + rho - 0.25 / (mu * mu)).abs());
                    if (k2 - k1).abs() < 1e-12 * k1.abs().max(1.0) {
                        m.umbilic += 1;
                    }
                }
                m
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("verify worker panicked"))
            .collect::<Vec<_>>()
    });
    let mut max_skew = 0.0f64;
    let mut max_model = 0.0f64;
    let mut max_identity = 0.0f64;
    let mut umbilic = 0usize;
    for m in maxima {
        max_skew = max_skew.max(m.skew);
        max_model = max_model.max(m.model);
        max_identity = max_identity.max(m.identity);
        umbilic += m.umbilic;
    }

    // flow-speed reduction: 5-point second derivative on every interior
    // ring whose four neighbours are uniformly spaced. Rings close to the
    // axis are excluded: the speed vanishes there while its higher
    // derivatives grow like powers of log x, so the stencil truncation
    // error diverges and the residual stops measuring the equation.
    let mut max_reduction = 0.0f64;
    let rings = &mesh.rings;
    let x_max = rings.iter().map(|r| r.x).fold(0.0f64, f64::max);
    for i in 2..rings.len().saturating_sub(2) {
        if rings[i - 2..=i + 2].iter().any(|r| r.x < 0.05 * x_max) {
            continue;
        }
        let h = rings[i + 1].s - rings[i].s;
        if h <= 0.0 {
            continue;
        }
        let uniform = (-2i64..=2).all(|k| {
            let expect = rings[i].s + k as f64 * h;
            (rings[(i as i64 + k) as usize].s - expect).abs() <= 1e-9 * h
        });
        if !uniform {
            continue;
        }
        let g = |j: usize| mu * rings[j].x;
        let gss =
            (-g(i - 2) + 16.0 * g(i - 1) - 30.0 * g(i) + 16.0 * g(i + 1) - g(i + 2)) / (12.0 * h * h);
        let kap = rings[i].kappa;
        let res = gss + (kap * kap - kap / mu + rho) * g(i);
        max_reduction = max_reduction.max(res.abs());
    }

    // apex rings: every secant to the neighbouring ring must lie in the
    // orbit plane for the cap to be tangent continuous
    let mut flagged = Vec::new();
    for (idx, ring) in rings.iter().enumerate() {
        if !ring.degenerate {
            continue;
        }
        let neighbour = if idx + 1 < rings.len() && !rings[idx + 1].degenerate {
            Some(idx + 1)
        } else if idx > 0 && !rings[idx - 1].degenerate {
            Some(idx - 1)
        } else {
            None
        };
        let Some(nb) = neighbour else {
            flagged.push(FlaggedRing {
                ring: idx,
                tangent_kink: f64::NAN,
            });
            continue;
        };
        let apex = mesh.vertices[ring.first_vertex];
        let mut kink = 0.0f64;
        for j in 0..rings[nb].count {
            let u = sub4(mesh.vertices[rings[nb].first_vertex + j], apex);
            let theta = TAU * j as f64 / mesh.slices as f64;
            let radial = [theta.cos(), theta.sin(), 0.0, 0.0];
            let norm = dot4(u, u).sqrt();
            if norm == 0.0 {
                continue;
            }
            let cosang = (dot4(u, radial) / norm).clamp(-1.0, 1.0);
            kink = kink.max(cosang.acos());
        }
        flagged.push(FlaggedRing {
            ring: idx,
            tangent_kink: kink,
        });
    }

    VerificationReport {
        max_skew_residual: max_skew,
        max_model_residual: max_model,
        max_reduction_residual: max_reduction,
        max_identity_residual: max_identity,
        umbilic_vertices: umbilic,
        flagged_rings: flagged,
        mean_curvature,
        gauss_curvature,
    }
}

fn sub3(a: [f64; 4], b: [f64; 4]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Discrete normal of the flat-case mesh at ring `i`, slice `j`, from
/// centred differences of the vertex positions.
fn discrete_normal(mesh: &SurfaceMesh, i: usize, j: usize) -> [f64; 3] {
    let slices = mesh.slices;
    let at = |i: usize, j: usize| mesh.vertices[mesh.rings[i].first_vertex + j % slices];
    let ts = sub3(at(i + 1, j), at(i - 1, j));
    let tt = sub3(at(i, j + 1), at(i, (j + slices - 1) % slices));
    normalize3(cross3(ts, tt))
}

/// Largest deviation between the discrete shape-operator curvatures of a
/// flat-case mesh and the analytic principal curvatures, sampled on a
/// vertex stride. Rings near the axis are excluded: the profile curvature
/// diverges there. The discrete normal field is matched to the analytic
/// orientation at one reference vertex; the remaining comparison is
/// orientation free. Verification only; exported data is analytic.
pub fn discrete_curvature_deviation(mesh: &SurfaceMesh, stride: usize) -> Result<f64> {
    if mesh.problem.rho() != 0.0 {
        return Err(Error::RequiresFlat {
            rho: mesh.problem.rho(),
        });
    }
    let stride = stride.max(1);
    let slices = mesh.slices;
    let x_max = mesh
        .rings
        .iter()
        .map(|r| r.x)
        .fold(0.0f64, f64::max);
    let usable = |i: usize| {
        i >= 2
            && i + 2 < mesh.rings.len()
            && (i - 2..=i + 2).all(|k| !mesh.rings[k].degenerate && mesh.rings[k].x > 0.1 * x_max)
    };
    let at = |i: usize, j: usize| mesh.vertices[mesh.rings[i].first_vertex + j % slices];

    let mut sign = 0.0f64;
    let mut worst = 0.0f64;
    let mut seen = false;
    let mut i = 2;
    while i + 2 < mesh.rings.len() {
        if !usable(i) {
            i += 1;
            continue;
        }
        let mut j = 0;
        while j < slices {
            let ts = sub3(at(i + 1, j), at(i - 1, j));
            let tt = sub3(at(i, j + 1), at(i, (j + slices - 1) % slices));
            let dn_s = {
                let a = discrete_normal(mesh, i + 1, j);
                let b = discrete_normal(mesh, i - 1, j);
                [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
            };
            let dn_t = {
                let a = discrete_normal(mesh, i, (j + 1) % slices);
                let b = discrete_normal(mesh, i, (j + slices - 1) % slices);
                [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
            };
            let kp = dot3(dn_s, ts) / dot3(ts, ts);
            let ko = dot3(dn_t, tt) / dot3(tt, tt);
            let v = mesh.rings[i].first_vertex + j;
            if !seen {
                let direct = (kp - mesh.k1[v]).abs().max((ko - mesh.k2[v]).abs());
                let flipped = (kp + mesh.k1[v]).abs().max((ko + mesh.k2[v]).abs());
                sign = if direct <= flipped { 1.0 } else { -1.0 };
                seen = true;
            }
            let dev = (sign * kp - mesh.k1[v])
                .abs()
                .max((sign * ko - mesh.k2[v]).abs());
            worst = worst.max(dev);
            j += stride;
        }
        i += stride;
    }
    if !seen {
        return Err(Error::Tolerance {
            what: "discrete curvature sampling",
        });
    }
    Ok(worst)
}

/// 3-space image used by the OBJ export of a curved-model mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Drop the fourth coordinate.
    Drop,
    /// Stereographic projection from the model point opposite the chart
    /// centre; points at the projection pole are clamped.
    Stereo,
}

impl std::fmt::Display for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Projection::Drop => "drop",
            Projection::Stereo => "stereo",
        })
    }
}

impl std::str::FromStr for Projection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "drop" => Ok(Projection::Drop),
            "stereo" => Ok(Projection::Stereo),
            other => Err(format!("unknown projection {other:?}; expected drop or stereo")),
        }
    }
}

fn project(v: [f64; 4], rho: f64, projection: Projection) -> [f64; 3] {
    if rho == 0.0 {
        return [v[0], v[1], v[2]];
    }
    match projection {
        Projection::Drop => [v[0], v[1], v[2]],
        Projection::Stereo => {
            let r = 1.0 / rho.abs().sqrt();
            let denom = (r + v[3]).max(1e-9 * r);
            let f = r / denom;
            [v[0] * f, v[1] * f, v[2] * f]
        }
    }
}

/// Writes the mesh as a Wavefront OBJ with 1-based indices. The flat case
/// writes coordinates as is; curved models are projected to 3-space for
/// viewing only.
pub fn write_obj<W: Write>(
    mesh: &SurfaceMesh,
    projection: Projection,
    out: &mut W,
) -> std::io::Result<()> {
    for v in &mesh.vertices {
        let p = project(*v, mesh.problem.rho(), projection);
        writeln!(
            out,
            "v {} {} {}",
            fmt_g(p[0], 9),
            fmt_g(p[1], 9),
            fmt_g(p[2], 9)
        )?;
    }
    for face in &mesh.faces {
        match face {
            Face::Tri([a, b, c]) => writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?,
            Face::Quad([a, b, c, d]) => {
                writeln!(out, "f {} {} {} {}", a + 1, b + 1, c + 1, d + 1)?
            }
        }
    }
    Ok(())
}

/// Metadata sidecar of an exported mesh.
pub fn sidecar(
    mesh: &SurfaceMesh,
    report: &VerificationReport,
    curve_type: &str,
    projection: Projection,
) -> serde_json::Value {
    json!({
        "rho": mesh.problem.rho(),
        "mu": mesh.problem.mu(),
        "d": mesh.d,
        "branch": mesh.branch.kind.to_string(),
        "type": curve_type,
        "skew": 1.0 / mesh.problem.mu(),
        "resolution": [mesh.rings.len(), mesh.slices],
        "periods": mesh.periods,
        "max_residuals": {
            "skew": report.max_skew_residual,
            "model": report.max_model_residual,
            "reduction": report.max_reduction_residual,
            "identity": report.max_identity_residual,
        },
        "projection": projection.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{self, BranchKind};
    use crate::trace::{integrate_profile, reflect_complete, TraceOptions};

    fn prob(mu: f64, rho: f64) -> EnergyProblem {
        EnergyProblem::new(mu, rho).unwrap()
    }

    fn branch(p: &EnergyProblem, d: f64, kind: BranchKind) -> BranchDescriptor {
        phase::components(d, p)
            .into_iter()
            .find(|b| b.kind == kind)
            .unwrap()
    }

    fn trace(p: &EnergyProblem, d: f64, kind: BranchKind, per_half: usize) -> ProfileCurve {
        let opts = TraceOptions {
            samples_per_half: per_half,
            ..TraceOptions::default()
        };
        integrate_profile(p, d, &branch(p, d, kind), &opts).unwrap()
    }

    #[test]
    fn flow_velocity_closed_forms() {
        assert_eq!(flow_velocity(0.0, &prob(1.0, 0.0)), 1.0);
        let v = flow_velocity(0.5, &prob(2.0, 0.0));
        assert!((v - 2.0 * std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn orbit_curvature_closed_forms() {
        assert!((orbit_curvature_sq(0.0, &prob(1.0, 0.0), 1.0) - 1.0).abs() < 1e-15);
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert!((orbit_curvature_sq(1.0, &prob(1.0, 0.0), e2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orbit_curvature_positive_along_traces() {
        for (mu, rho, d) in [(1.0, 0.0, 0.5), (0.25, 1.0, 0.95), (1.0, -1.0, 0.3)] {
            let p = prob(mu, rho);
            let curve = trace(&p, d, BranchKind::Axis, 64);
            for smp in curve.uniform_core() {
                let eta = orbit_curvature_sq(smp.kappa, &p, d);
                assert!(eta + rho > 0.0, "orbit not a circle at s = {}", smp.s);
            }
        }
    }

    #[test]
    fn ovaloid_mesh_structure() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 128);
        let slices = 48;
        let mesh = revolve(&curve, slices, 1).unwrap();

        let n = mesh.rings.len();
        assert_eq!(n, curve.samples.len());
        assert!(mesh.rings[0].degenerate && mesh.rings[n - 1].degenerate);
        assert!(mesh.rings[1..n - 1].iter().all(|r| !r.degenerate));
        let expect_vertices = 2 + slices * (n - 2);
        assert_eq!(mesh.vertices.len(), expect_vertices);
        let quads = mesh
            .faces
            .iter()
            .filter(|f| matches!(f, Face::Quad(_)))
            .count();
        let tris = mesh
            .faces
            .iter()
            .filter(|f| matches!(f, Face::Tri(_)))
            .count();
        assert_eq!(tris, 2 * slices);
        assert_eq!(quads, slices * (n - 3));

        // every vertex sits in the plane and at axis distance mu x / sqrt d
        let rd = 0.5f64.sqrt();
        for ring in &mesh.rings {
            for j in 0..ring.count {
                let v = mesh.vertices[ring.first_vertex + j];
                assert_eq!(v[3], 0.0);
                let r = v[0].hypot(v[1]);
                let expect = if ring.degenerate { 0.0 } else { ring.x / rd };
                assert!((r - expect).abs() < 1e-12, "axis distance at s = {}", ring.s);
            }
        }

        // rotation invariance of the curvature data within each ring
        for ring in mesh.rings.iter().filter(|r| !r.degenerate) {
            let f = ring.first_vertex;
            for j in 1..ring.count {
                assert_eq!(mesh.k1[f], mesh.k1[f + j]);
                assert_eq!(mesh.k2[f], mesh.k2[f + j]);
            }
        }

        // face indices in range
        for face in &mesh.faces {
            let idx: &[usize] = match face {
                Face::Tri(v) => v,
                Face::Quad(v) => v,
            };
            assert!(idx.iter().all(|&i| i < mesh.vertices.len()));
        }
    }

    #[test]
    fn ovaloid_verification_residuals() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 512);
        let mesh = revolve(&curve, 16, 1).unwrap();
        let report = verify_surface(&mesh);
        assert!(report.max_skew_residual < 1e-8, "{}", report.max_skew_residual);
        assert!(report.max_model_residual < 1e-9, "{}", report.max_model_residual);
        assert!(
            report.max_identity_residual < 1e-10,
            "{}",
            report.max_identity_residual
        );
        assert!(
            report.max_reduction_residual < 1e-7,
            "{}",
            report.max_reduction_residual
        );
        assert_eq!(report.umbilic_vertices, 0);
        assert_eq!(report.flagged_rings.len(), 2);
        for f in &report.flagged_rings {
            assert!(
                f.tangent_kink < 1e-3,
                "apex kink {} at ring {}",
                f.tangent_kink,
                f.ring
            );
        }
        // curvature fields: H and K finite off the axis, NaN on it
        for ring in &mesh.rings {
            let h = report.mean_curvature[ring.first_vertex];
            assert_eq!(h.is_finite(), !ring.degenerate);
        }
    }

    #[test]
    fn sphere_mesh_lies_on_model() {
        let p = prob(0.25, 1.0);
        let curve = trace(&p, 0.95, BranchKind::Axis, 2048);
        let mesh = revolve(&curve, 24, 1).unwrap();
        let report = verify_surface(&mesh);
        assert!(report.max_model_residual < 1e-9, "{}", report.max_model_residual);
        assert!(report.max_skew_residual < 1e-8);
        assert!(
            report.max_reduction_residual < 1e-7,
            "{}",
            report.max_reduction_residual
        );
    }

    #[test]
    fn hyperbolic_mesh_lies_on_model() {
        let p = prob(1.0, -1.0);
        let curve = trace(&p, 0.3, BranchKind::Axis, 128);
        let mesh = revolve(&curve, 24, 1).unwrap();
        for v in &mesh.vertices {
            assert!(v[3] > 0.0);
        }
        let report = verify_surface(&mesh);
        assert!(report.max_model_residual < 1e-9, "{}", report.max_model_residual);
    }

    #[test]
    fn periodic_tube_translates_by_the_angle_advance() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Loop, 128);
        let periods = 3;
        let mesh = revolve(&curve, 12, periods).unwrap();
        let n = curve.samples.len();
        assert_eq!(mesh.rings.len(), n + (periods - 1) * (n - 1));

        // corresponding rings one period apart differ by a translation of
        // sqrt(d) * psi_period along the axis coordinate
        let dz = 0.5f64.sqrt() * curve.psi_period.unwrap();
        for i in 0..n - 1 {
            let a = &mesh.rings[i];
            let b = &mesh.rings[i + n - 1];
            assert!((b.s - a.s - curve.period.unwrap()).abs() < 1e-12);
            let va = mesh.vertices[a.first_vertex];
            let vb = mesh.vertices[b.first_vertex];
            assert!((vb[2] - va[2] - dz).abs() < 1e-9, "ring {i}");
            assert!((va[0] - vb[0]).abs() < 1e-9);
        }
        let report = verify_surface(&mesh);
        assert!(report.max_reduction_residual < 1e-7);
        assert!(report.flagged_rings.is_empty());
    }

    #[test]
    fn pole_loop_periods_stay_on_sphere() {
        let p = prob(0.35, 1.0);
        let dp = crate::classify::pole_level(&p).unwrap();
        let curve = trace(&p, dp, BranchKind::Loop, 96);
        assert!(curve.pole_passing);
        let mesh = revolve(&curve, 16, 4).unwrap();
        let report = verify_surface(&mesh);
        assert!(report.max_model_residual < 1e-9, "{}", report.max_model_residual);
        // adjacent rings stay close: the chart-side alternation does not
        // tear the surface at the period junctions or at the poles
        let mut max_gap = 0.0f64;
        for w in mesh.rings.windows(2) {
            let a = mesh.vertices[w[0].first_vertex];
            let b = mesh.vertices[w[1].first_vertex];
            let gap = dot4(sub4(a, b), sub4(a, b)).sqrt();
            max_gap = max_gap.max(gap);
        }
        let step = curve.core_step();
        assert!(max_gap < 4.0 * step, "gap {max_gap} vs step {step}");
    }

    #[test]
    fn revolve_rejections() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 32);
        assert!(matches!(
            revolve(&curve, 2, 1),
            Err(Error::TooFewSlices { got: 2 })
        ));
        assert!(matches!(
            revolve(&curve, 12, 0),
            Err(Error::NotPositive { .. })
        ));
        assert!(matches!(
            revolve(&curve, 12, 2),
            Err(Error::NotPeriodic { .. })
        ));
        let closed = reflect_complete(&curve).unwrap();
        assert!(matches!(
            revolve(&closed, 12, 1),
            Err(Error::ReflectedProfile)
        ));
    }

    #[test]
    fn discrete_shape_operator_matches_analytic() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 1024);
        let mesh = revolve(&curve, 512, 1).unwrap();
        let dev = discrete_curvature_deviation(&mesh, 8).unwrap();
        assert!(dev < 1e-2, "discrete curvature deviation {dev}");

        let sphere_curve = trace(&prob(0.25, 1.0), 0.95, BranchKind::Axis, 32);
        let sphere_mesh = revolve(&sphere_curve, 12, 1).unwrap();
        assert!(matches!(
            discrete_curvature_deviation(&sphere_mesh, 4),
            Err(Error::RequiresFlat { .. })
        ));
    }

    #[test]
    fn obj_export_shape() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 16);
        let mesh = revolve(&curve, 6, 1).unwrap();
        let mut buf = Vec::new();
        write_obj(&mesh, Projection::Drop, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v_lines = text.lines().filter(|l| l.starts_with("v ")).count();
        let f_lines = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(v_lines, mesh.vertices.len());
        assert_eq!(f_lines, mesh.faces.len());
        // 1-based indices, all in range
        for line in text.lines().filter(|l| l.starts_with("f ")) {
            for tok in line.split_whitespace().skip(1) {
                let i: usize = tok.parse().unwrap();
                assert!(i >= 1 && i <= mesh.vertices.len());
            }
        }
        // coordinates are %.9g: no exponent padding, shortest form
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("v "));
        assert!(!first.contains("e-00"));
    }

    #[test]
    fn stereo_projection_bounded_for_sphere() {
        let p = prob(0.25, 1.0);
        let curve = trace(&p, 0.95, BranchKind::Axis, 32);
        let mesh = revolve(&curve, 8, 1).unwrap();
        let mut buf = Vec::new();
        write_obj(&mesh, Projection::Stereo, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().filter(|l| l.starts_with("v ")) {
            for tok in line.split_whitespace().skip(1) {
                let v: f64 = tok.parse().unwrap();
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn sidecar_carries_surface_metadata() {
        let p = prob(1.0, 0.0);
        let curve = trace(&p, 0.5, BranchKind::Axis, 16);
        let mesh = revolve(&curve, 6, 1).unwrap();
        let report = verify_surface(&mesh);
        let js = sidecar(&mesh, &report, "oval", Projection::Drop);
        assert_eq!(js["rho"], 0.0);
        assert_eq!(js["mu"], 1.0);
        assert_eq!(js["d"], 0.5);
        assert_eq!(js["type"], "oval");
        assert_eq!(js["skew"], 1.0);
        assert_eq!(js["branch"], "axis");
        assert_eq!(js["periods"], 1);
        assert_eq!(js["projection"], "drop");
        assert_eq!(js["resolution"][1], 6);
        assert!(js["max_residuals"]["skew"].as_f64().unwrap() < 1e-8);
    }
}

