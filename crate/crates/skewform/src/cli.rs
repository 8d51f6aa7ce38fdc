//! Command-line front end: flag parsing, pipeline orchestration, file
//! output, and figure presets.
//!
//! Subcommands:
//! - `phase`: export a phase-portrait JSON document for a list of levels;
//! - `classify`: print the shape of one branch (or of every branch) of a
//!   level set as JSON;
//! - `trace`: integrate one branch into a curve CSV plus a JSON sidecar;
//! - `special`: solve for a special level (`figure-eight`, `borderline`,
//!   or `pole`) and print it;
//! - `surface`: revolve one branch into an OBJ mesh plus a JSON sidecar;
//! - `sweep`: classify a `(mu, d)` grid into a CSV table;
//! - `verify`: recompute the invariants of a stored trace CSV;
//! - `preset`: regenerate the data files of one bundled example figure.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O.
//! Failures print a one-line JSON document
//! `{"error":{"kind":...,"message":...}}` on stderr. The environment
//! variable `SKEWFORM_TOL` overrides the integrator tolerances of every
//! command that traces curves. Identical invocations produce byte-identical
//! output files: numbers are printed with seventeen significant digits,
//! JSON keys are sorted, and no timestamps are embedded.

use std::f64::consts::{E, FRAC_PI_2};
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::classify;
use crate::energy::EnergyProblem;
use crate::geometry::{model_residual, reflect_alpha};
use crate::num::fmt_g;
use crate::phase::{self, BranchDescriptor, BranchKind, PhaseState};
use crate::surface::{self, Projection};
use crate::trace::{self, CurveSample, TraceOptions};
use crate::{Error, Result};

/// Failure class reported on stderr and reflected in the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    Validation,
    Numeric,
}

/// Splits library errors into parameter problems and numeric breakdowns.
fn fault(err: &Error) -> Fault {
    if err.is_parameter_error() {
        Fault::Validation
    } else {
        Fault::Numeric
    }
}

/// A command failure carrying the exit class and message.
#[derive(Debug)]
enum CliFailure {
    Lib(Error),
    Invalid(String),
    Failed(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        CliFailure::Lib(e)
    }
}

impl CliFailure {
    /// Prints the error JSON on stderr and returns the exit code.
    fn emit(&self) -> i32 {
        let (kind, code, message) = match self {
            CliFailure::Lib(e) => match fault(e) {
                Fault::Validation => ("validation", 2, e.to_string()),
                Fault::Numeric => ("numeric", 3, e.to_string()),
            },
            CliFailure::Invalid(m) => ("validation", 2, m.clone()),
            CliFailure::Failed(m) => ("numeric", 3, m.clone()),
            CliFailure::Io { path, source } => {
                ("io", 4, format!("{}: {}", path.display(), source))
            }
        };
        eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
        code
    }
}

fn io_fail(path: &Path, source: std::io::Error) -> CliFailure {
    CliFailure::Io {
        path: path.to_path_buf(),
        source,
    }
}

type CliResult = std::result::Result<(), CliFailure>;

/// Critical curves of exponential curvature energies in 2-space forms and
/// the constant-skew-curvature rotational surfaces they sweep out.
#[derive(Parser)]
#[command(name = "skewform", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export a phase portrait of selected levels as JSON.
    Phase(PhaseArgs),
    /// Print the shape of a level set's branches as JSON.
    Classify(ClassifyArgs),
    /// Integrate one branch into a curve CSV with a JSON sidecar.
    Trace(TraceArgs),
    /// Solve for a special level and print it.
    Special(SpecialArgs),
    /// Build a rotational surface mesh as OBJ with a JSON sidecar.
    Surface(SurfaceArgs),
    /// Classify a parameter grid into a CSV table.
    Sweep(SweepArgs),
    /// Recompute the invariants of a stored trace CSV.
    Verify(VerifyArgs),
    /// Regenerate the data files of one bundled example figure.
    Preset(PresetArgs),
}

#[derive(Args)]
struct PhaseArgs {
    /// Sectional curvature of the ambient space form.
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// Energy index; negative values flip to the canonical orientation.
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Level to draw; repeat for several levels. Defaults to three levels
    /// around the separatrix (or around 1 when there is no saddle).
    #[arg(long = "d", value_name = "LEVEL", allow_negative_numbers = true)]
    d: Vec<f64>,
    /// Polyline points per branch.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Level of the first integral.
    #[arg(long, allow_negative_numbers = true)]
    d: f64,
    /// Branch to classify: axis, loop, sep-inner, or sep-outer. Omitting
    /// it prints every branch of the level set.
    #[arg(long)]
    branch: Option<String>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, allow_negative_numbers = true)]
    d: f64,
    /// Branch to integrate: axis, loop, sep-inner, or sep-outer.
    #[arg(long)]
    branch: String,
    /// Uniform output samples per half arc.
    #[arg(long)]
    samples: Option<usize>,
    /// Arc length granted to each side of an asymptotic arc.
    #[arg(long)]
    budget: Option<f64>,
    /// Output CSV path; the JSON sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpecialArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Which level to solve for: figure-eight, borderline, or pole.
    #[arg(long)]
    kind: String,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, allow_negative_numbers = true)]
    d: f64,
    /// Profile branch to revolve: axis, loop, sep-inner, or sep-outer.
    #[arg(long)]
    branch: String,
    /// Profile samples per half arc.
    #[arg(long, default_value_t = 512)]
    rings: usize,
    /// Angular samples around the axis.
    #[arg(long, default_value_t = 128)]
    slices: usize,
    /// Curvature periods to extend periodic profiles over.
    #[arg(long, default_value_t = 1)]
    periods: usize,
    /// 3-space image for curved models: drop or stereo.
    #[arg(long, default_value = "drop")]
    projection: String,
    /// Output OBJ path; the JSON sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// Energy index grid as A:B:N (N points, endpoints included).
    #[arg(long, value_name = "A:B:N")]
    mu_range: String,
    /// Level grid as A:B:N (N points, endpoints included).
    #[arg(long, value_name = "A:B:N")]
    d_range: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace CSV to recheck; its JSON sidecar must sit next to it.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct PresetArgs {
    /// Figure to regenerate: fig1, fig3, fig4, fig5, or fig6.
    #[arg(long)]
    name: String,
    /// Output directory for the panel files.
    #[arg(long)]
    out: PathBuf,
}

/// Parses the argument list, runs the selected command, and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => f.emit(),
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Phase(a) => cmd_phase(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Special(a) => cmd_special(a),
        Command::Surface(a) => cmd_surface(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Preset(a) => cmd_preset(a),
    }
}

/// Default trace options with the `SKEWFORM_TOL` override applied.
fn trace_options() -> std::result::Result<TraceOptions, CliFailure> {
    let mut opts = TraceOptions::default();
    if let Ok(raw) = std::env::var("SKEWFORM_TOL") {
        let tol: f64 = raw.trim().parse().map_err(|_| {
            CliFailure::Invalid(format!("SKEWFORM_TOL {raw:?} is not a number"))
        })?;
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(CliFailure::Invalid(format!(
                "SKEWFORM_TOL must lie in (0, 1e-2], got {tol}"
            )));
        }
        opts.abs_tol = tol;
        opts.rel_tol = tol;
    }
    Ok(opts)
}

fn parse_branch(name: &str) -> std::result::Result<BranchKind, CliFailure> {
    name.parse().map_err(CliFailure::Invalid)
}

/// Looks up the component of the requested kind on the level set.
fn find_branch(prob: &EnergyProblem, d: f64, kind: BranchKind) -> Result<BranchDescriptor> {
    if !(d > 0.0) {
        return Err(Error::NotPositive {
            name: "level d",
            value: d,
        });
    }
    phase::components(d, prob)
        .into_iter()
        .find(|b| b.kind == kind)
        .ok_or_else(|| Error::NoSuchBranch {
            wanted: kind.to_string(),
            d,
        })
}

/// Parses a grid specification `A:B:N`.
fn parse_range(spec: &str) -> std::result::Result<(f64, f64, usize), CliFailure> {
    let bad = |what: &str| CliFailure::Invalid(format!("range {spec:?}: {what}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected A:B:N"));
    }
    let a: f64 = parts[0].parse().map_err(|_| bad("A is not a number"))?;
    let b: f64 = parts[1].parse().map_err(|_| bad("B is not a number"))?;
    let n: usize = parts[2].parse().map_err(|_| bad("N is not a count"))?;
    if !a.is_finite() || !b.is_finite() {
        return Err(bad("endpoints must be finite"));
    }
    if n == 0 {
        return Err(bad("N must be at least 1"));
    }
    Ok((a, b, n))
}

/// `n` evenly spaced values from `a` to `b`, endpoints included.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn worker_count(tasks: usize) -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(tasks.max(1))
}

fn write_json_file(path: &Path, value: &serde_json::Value) -> CliResult {
    let mut f = fs::File::create(path).map_err(|e| io_fail(path, e))?;
    writeln!(f, "{value:#}").map_err(|e| io_fail(path, e))
}

fn cmd_phase(a: PhaseArgs) -> CliResult {
    let prob = EnergyProblem::new(a.mu, a.rho)?;
    let levels = if a.d.is_empty() {
        match phase::separatrix_level(&prob) {
            Some(sep) => vec![0.5 * sep, sep, 2.0 * sep],
            None => vec![0.5, 1.0, 2.0],
        }
    } else {
        for &d in &a.d {
            if !(d > 0.0) {
                return Err(Error::NotPositive {
                    name: "level d",
                    value: d,
                }
                .into());
            }
        }
        a.d
    };
    let doc = phase::portrait(&prob, &levels, a.samples);
    let value = serde_json::to_value(&doc).expect("portrait serializes");
    write_json_file(&a.out, &value)
}

fn cmd_classify(a: ClassifyArgs) -> CliResult {
    let prob = EnergyProblem::new(a.mu, a.rho)?;
    match a.branch {
        Some(name) => {
            let kind = parse_branch(&name)?;
            let desc = find_branch(&prob, a.d, kind)?;
            let ty = classify::classify(&prob, a.d, &desc)?;
            println!("{}", serde_json::to_string(&ty).expect("type serializes"));
        }
        None => {
            let rows = classify::classify_level(&prob, a.d)?;
            let list: Vec<serde_json::Value> = rows
                .iter()
                .map(|(b, ty)| {
                    json!({
                        "branch": b.kind.to_string(),
                        "x0": b.x0,
                        "x_lo": b.x_lo,
                        "type": ty.tag.to_string(),
                        "qualifier": ty.qualifier.map(|q| q.to_string()),
                    })
                })
                .collect();
            println!("{}", serde_json::Value::Array(list));
        }
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> CliResult {
    let prob = EnergyProblem::new(a.mu, a.rho)?;
    let kind = parse_branch(&a.branch)?;
    let desc = find_branch(&prob, a.d, kind)?;
    let mut opts = trace_options()?;
    if let Some(n) = a.samples {
        if n < 16 {
            return Err(CliFailure::Invalid(format!(
                "--samples must be at least 16, got {n}"
            )));
        }
        opts.samples_per_half = n;
    }
    if let Some(b) = a.budget {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliFailure::Invalid(format!(
                "--budget must be a positive length, got {b}"
            )));
        }
        opts.budget = b;
    }
    let curve = trace::integrate_profile(&prob, a.d, &desc, &opts)?;
    let ty = classify::classify(&prob, a.d, &desc)?;
    let file = fs::File::create(&a.out).map_err(|e| io_fail(&a.out, e))?;
    let mut out = BufWriter::new(file);
    trace::write_curve_csv(&curve, &mut out).map_err(|e| io_fail(&a.out, e))?;
    out.flush().map_err(|e| io_fail(&a.out, e))?;
    let side = a.out.with_extension("json");
    write_json_file(&side, &trace::sidecar(&curve, &ty.to_string()))
}

fn cmd_special(a: SpecialArgs) -> CliResult {
    let prob = EnergyProblem::new(a.mu, a.rho)?;
    let level = match a.kind.as_str() {
        "borderline" => classify::borderline_level(&prob).ok_or_else(|| {
            CliFailure::Invalid(
                "no borderline level: the phase plane has no saddle for these parameters"
                    .to_string(),
            )
        })?,
        "figure-eight" => classify::find_figure_eight(&prob)?,
        "pole" => classify::pole_level(&prob)?,
        other => {
            return Err(CliFailure::Invalid(format!(
                "unknown kind {other:?}; expected figure-eight, borderline, or pole"
            )))
        }
    };
    println!("{}", fmt_g(level, 17));
    Ok(())
}

fn cmd_surface(a: SurfaceArgs) -> CliResult {
    let prob = EnergyProblem::new(a.mu, a.rho)?;
    let kind = parse_branch(&a.branch)?;
    let desc = find_branch(&prob, a.d, kind)?;
    let projection: Projection = a.projection.parse().map_err(CliFailure::Invalid)?;
    let mut opts = trace_options()?;
    if a.rings < 16 {
        return Err(CliFailure::Invalid(format!(
            "--rings must be at least 16, got {}",
            a.rings
        )));
    }
    opts.samples_per_half = a.rings;
    let curve = trace::integrate_profile(&prob, a.d, &desc, &opts)?;
    let mesh = surface::revolve(&curve, a.slices, a.periods)?;
    let report = surface::verify_surface(&mesh);
    let ty = classify::classify(&prob, a.d, &desc)?;
    let file = fs::File::create(&a.out).map_err(|e| io_fail(&a.out, e))?;
    let mut out = BufWriter::new(file);
    surface::write_obj(&mesh, projection, &mut out).map_err(|e| io_fail(&a.out, e))?;
    out.flush().map_err(|e| io_fail(&a.out, e))?;
    let side = a.out.with_extension("json");
    write_json_file(
        &side,
        &surface::sidecar(&mesh, &report, &ty.to_string(), projection),
    )
}

/// One classified grid point of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub mu: f64,
    pub d: f64,
    pub branch: BranchDescriptor,
    pub curve_type: classify::CurveType,
    /// Junction angle of axis branches; the chart-corrected value at pole
    /// levels; absent for branches that do not meet the axis limit.
    pub psi0: Option<f64>,
}

fn sweep_one_mu(rho: f64, mu: f64, d_values: &[f64]) -> Result<Vec<SweepRow>> {
    let prob = EnergyProblem::new(mu, rho)?;
    let mut rows = Vec::new();
    for &d in d_values {
        for branch in phase::components(d, &prob) {
            let curve_type = classify::classify(&prob, d, &branch)?;
            let psi0 = match branch.kind {
                BranchKind::Axis => match trace::psi_at_zero(&prob, d) {
                    Ok(v) => Some(v),
                    Err(Error::PoleLevel { .. }) => {
                        let raw = trace::pole_psi(&prob)?;
                        Some(raw - FRAC_PI_2 / (prob.rho() * d).sqrt())
                    }
                    Err(Error::SeparatrixDivergence { .. }) => None,
                    Err(e) => return Err(e),
                },
                _ => None,
            };
            rows.push(SweepRow {
                mu,
                d,
                branch,
                curve_type,
                psi0,
            });
        }
    }
    Ok(rows)
}

/// Classifies every branch over the `(mu, d)` grid. Rows follow the grid
/// order (outer `mu`, inner `d`, then branch order); the work fans out
/// over `mu` grid lines.
pub fn sweep_grid(rho: f64, mu_values: &[f64], d_values: &[f64]) -> Result<Vec<SweepRow>> {
    for &d in d_values {
        if !(d > 0.0) {
            return Err(Error::NotPositive {
                name: "level d",
                value: d,
            });
        }
    }
    let mut per_mu: Vec<Result<Vec<SweepRow>>> = Vec::with_capacity(mu_values.len());
    per_mu.resize_with(mu_values.len(), || Ok(Vec::new()));
    let chunk = mu_values.len().div_ceil(worker_count(mu_values.len()));
    std::thread::scope(|scope| {
        for (mus, outs) in mu_values.chunks(chunk).zip(per_mu.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (mu, slot) in mus.iter().zip(outs.iter_mut()) {
                    *slot = sweep_one_mu(rho, *mu, d_values);
                }
            });
        }
    });
    let mut rows = Vec::new();
    for r in per_mu {
        rows.extend(r?);
    }
    Ok(rows)
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let (ma, mb, mn) = parse_range(&a.mu_range)?;
    let (da, db, dn) = parse_range(&a.d_range)?;
    let rows = sweep_grid(a.rho, &grid(ma, mb, mn), &grid(da, db, dn))?;
    let file = fs::File::create(&a.out).map_err(|e| io_fail(&a.out, e))?;
    let mut out = BufWriter::new(file);
    let emit = |out: &mut BufWriter<fs::File>, row: &SweepRow| -> std::io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_g(a.rho, 17),
            fmt_g(row.mu, 17),
            fmt_g(row.d, 17),
            row.branch.kind,
            row.curve_type.tag,
            row.curve_type.qualifier.map(|q| q.to_string()).unwrap_or_default(),
            fmt_g(row.branch.x0, 17),
            row.psi0.map(|v| fmt_g(v, 17)).unwrap_or_default(),
        )
    };
    (|| -> std::io::Result<()> {
        writeln!(out, "rho,mu,d,branch,type,qualifier,x0,psi0")?;
        for row in &rows {
            emit(&mut out, row)?;
        }
        out.flush()
    })()
    .map_err(|e| io_fail(&a.out, e))
}

/// Deviation from orthogonality between the level's axis-bound arc and the
/// rotation axis, measured at abscissa `x` in the chart metric. The arc's
/// slope is taken from the first integral, so once the drift check has
/// confirmed the level this evaluates the meeting angle of the traced
/// curve where integration stops at the axis cutoff.
pub fn axis_angle_deviation(prob: &EnergyProblem, d: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mu = prob.mu();
    let y_sq = (d - phase::fhat(x, prob)) / (mu * mu);
    if y_sq <= 0.0 {
        return FRAC_PI_2;
    }
    let u = mu * x;
    let r_sq = d - prob.rho() * u * u;
    let v_dot = x * (x.ln() - 1.0) / (d - prob.rho_mu_sq() * x * x);
    (r_sq * v_dot / (mu * y_sq.sqrt())).atan().abs()
}

/// Recomputed invariants of a stored trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceCheck {
    /// Number of samples examined.
    pub samples: usize,
    /// Arc length strictly increases along the rows.
    pub ordered: bool,
    /// Largest `|mu kappa - ln x|` over positive-abscissa samples.
    pub curvature_max: f64,
    /// Largest relative first-integral drift.
    pub drift_max: f64,
    /// Largest finite-difference Euler-Lagrange residual over uniformly
    /// spaced interior samples away from the axis.
    pub el_residual_max: f64,
    /// Largest mirror-pair deviation; absent for one-sided arcs.
    pub mirror_max: Option<f64>,
    /// Axis meeting-angle deviation at the integration cutoff; absent for
    /// branches that never reach the axis.
    pub axis_angle: Option<f64>,
    /// Largest deviation of the axis limit speed `|mu y|` from `sqrt(d)`;
    /// absent without limit samples.
    pub axis_limit_max: Option<f64>,
    /// Largest distance of the stored points from the model quadric,
    /// relative to the squared point norm.
    pub model_residual_max: f64,
    /// Every invariant holds within its tolerance.
    pub ok: bool,
}

/// Recomputes the curve invariants over stored samples.
///
/// Tolerances: drift 1e-8, Euler-Lagrange residual 1e-6, mirror pairs and
/// axis limit speed 1e-9, axis meeting angle 1e-4 rad, model residual 1e-9
/// relative. The finite-difference residual skips samples whose stencil
/// reaches below five percent of the widest abscissa, where the stencil
/// truncation stops measuring the equation.
pub fn verify_samples(
    prob: &EnergyProblem,
    d: f64,
    kind: BranchKind,
    samples: &[CurveSample],
) -> TraceCheck {
    let mu = prob.mu();
    let n = samples.len();

    let ordered = samples.windows(2).all(|w| w[1].s > w[0].s);

    let mut curvature_max = 0.0f64;
    let mut drift_max = 0.0f64;
    let mut model_residual_max = 0.0f64;
    let mut axis_limit_max: Option<f64> = None;
    for smp in samples {
        let p = smp.point;
        let norm_sq = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        model_residual_max =
            model_residual_max.max(model_residual(p, prob.rho()) / (1.0 + norm_sq));
        if smp.x > 0.0 {
            curvature_max = curvature_max.max((mu * smp.kappa - smp.x.ln()).abs());
            let f = phase::f_value(&PhaseState::new(smp.x, smp.y), prob);
            drift_max = drift_max.max((f - d).abs() / d);
        } else {
            let dev = ((mu * smp.y).abs() - d.sqrt()).abs();
            axis_limit_max = Some(axis_limit_max.unwrap_or(0.0).max(dev));
        }
    }

    // Euler-Lagrange residual: the scaled equation in terms of
    // x = exp(mu kappa) needs only the second x derivative, taken by a
    // 9-point stencil over uniformly spaced samples. The wide stencil
    // keeps the truncation error negligible even on asymptotic arcs,
    // where the sample spacing is coarse and the higher x derivatives
    // carry inverse powers of the index
    const STENCIL: [f64; 9] = [
        -1.0 / 560.0,
        8.0 / 315.0,
        -0.2,
        1.6,
        -205.0 / 72.0,
        1.6,
        -0.2,
        8.0 / 315.0,
        -1.0 / 560.0,
    ];
    let mut el_residual_max = 0.0f64;
    let x_max = samples.iter().map(|s| s.x).fold(0.0f64, f64::max);
    for i in 4..n.saturating_sub(4) {
        let win = &samples[i - 4..=i + 4];
        if win.iter().any(|s| s.x < 0.05 * x_max) {
            continue;
        }
        let h = samples[i + 1].s - samples[i].s;
        if h <= 0.0 {
            continue;
        }
        let uniform = (-4i64..=4).all(|k| {
            let expect = samples[i].s + k as f64 * h;
            (samples[(i as i64 + k) as usize].s - expect).abs() <= 1e-9 * h
        });
        if !uniform {
            continue;
        }
        let x = samples[i].x;
        let x_ss = win
            .iter()
            .zip(STENCIL)
            .map(|(s, c)| c * s.x)
            .sum::<f64>()
            / (h * h);
        let kappa_s = samples[i].y / (mu * x);
        let kappa_ss = x_ss / (mu * x) - samples[i].y * samples[i].y / (mu * x * x);
        let st = crate::energy::CurvatureState::with_second(samples[i].kappa, kappa_s, kappa_ss);
        let res = crate::energy::el_residual(&st, prob).expect("second derivative present");
        el_residual_max = el_residual_max.max(res.abs());
    }

    let mirror_max = if kind == BranchKind::SepInner {
        None
    } else {
        let mut worst = 0.0f64;
        for i in 0..n / 2 {
            let a = &samples[i];
            let b = &samples[n - 1 - i];
            let rp = reflect_alpha(b.point);
            let dev = (a.s + b.s)
                .abs()
                .max((a.x - b.x).abs())
                .max((a.y + b.y).abs())
                .max((a.psi + b.psi).abs())
                .max((a.point[0] - rp[0]).abs())
                .max((a.point[1] - rp[1]).abs())
                .max((a.point[2] - rp[2]).abs());
            worst = worst.max(dev);
        }
        Some(worst)
    };

    let axis_angle = match kind {
        BranchKind::Axis | BranchKind::SepInner => Some(axis_angle_deviation(
            prob,
            d,
            TraceOptions::default().x_cutoff,
        )),
        BranchKind::Loop | BranchKind::SepOuter => None,
    };

    let ok = ordered
        && curvature_max <= 1e-12
        && drift_max <= 1e-8
        && el_residual_max <= 1e-6
        && mirror_max.map_or(true, |v| v <= 1e-9)
        && axis_angle.map_or(true, |v| v <= 1e-4)
        && axis_limit_max.map_or(true, |v| v <= 1e-9 * (1.0 + d.sqrt()))
        && model_residual_max <= 1e-9;

    TraceCheck {
        samples: n,
        ordered,
        curvature_max,
        drift_max,
        el_residual_max,
        mirror_max,
        axis_angle,
        axis_limit_max,
        model_residual_max,
        ok,
    }
}

/// Parses the CSV written by the trace pipeline back into samples.
fn parse_curve_csv(text: &str) -> std::result::Result<Vec<CurveSample>, CliFailure> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliFailure::Invalid("trace file is empty".to_string()))?;
    if header != "s,x,y,kappa,psi,px,py,pz" {
        return Err(CliFailure::Invalid(format!(
            "unexpected trace header {header:?}"
        )));
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CliFailure::Invalid(format!(
                "row {}: expected 8 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let mut v = [0.0f64; 8];
        for (j, field) in fields.iter().enumerate() {
            v[j] = field.parse().map_err(|_| {
                CliFailure::Invalid(format!("row {}: field {:?} is not a number", idx + 2, field))
            })?;
        }
        samples.push(CurveSample {
            s: v[0],
            x: v[1],
            y: v[2],
            kappa: v[3],
            psi: v[4],
            point: [v[5], v[6], v[7]],
        });
    }
    if samples.is_empty() {
        return Err(CliFailure::Invalid("trace file has no samples".to_string()));
    }
    Ok(samples)
}

fn sidecar_f64(meta: &serde_json::Value, key: &str) -> std::result::Result<f64, CliFailure> {
    meta.get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CliFailure::Invalid(format!("sidecar is missing the number {key:?}")))
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let text = fs::read_to_string(&a.input).map_err(|e| io_fail(&a.input, e))?;
    let side_path = a.input.with_extension("json");
    let side_text = fs::read_to_string(&side_path).map_err(|e| io_fail(&side_path, e))?;
    let meta: serde_json::Value = serde_json::from_str(&side_text)
        .map_err(|e| CliFailure::Invalid(format!("sidecar is not valid JSON: {e}")))?;
    let rho = sidecar_f64(&meta, "rho")?;
    let mu = sidecar_f64(&meta, "mu")?;
    let d = sidecar_f64(&meta, "d")?;
    let kind = meta
        .get("branch")
        .and_then(|v| v.as_str())
        .ok_or_else(|| CliFailure::Invalid("sidecar is missing the branch".to_string()))
        .and_then(|s| parse_branch(s))?;
    let prob = EnergyProblem::new(mu, rho)?;
    let samples = parse_curve_csv(&text)?;
    let check = verify_samples(&prob, d, kind, &samples);
    let value = serde_json::to_value(&check).expect("check serializes");
    println!("{value:#}");
    if !check.ok {
        return Err(CliFailure::Failed(
            "stored trace violates at least one invariant".to_string(),
        ));
    }
    Ok(())
}

/// One panel of a figure preset.
struct Panel {
    prob: EnergyProblem,
    d: f64,
    kind: BranchKind,
    mesh: bool,
}

/// The six shape panels of one figure family: oval, simple biconcave,
/// figure-eight, non-simple biconcave, borderline, orbit-like.
fn shape_panels(
    mu: f64,
    rho: f64,
    d_oval: f64,
    d_simple: f64,
    d_nonsimple: f64,
    d_orbit: f64,
    mesh: bool,
) -> std::result::Result<Vec<Panel>, CliFailure> {
    let prob = EnergyProblem::new(mu, rho)?;
    let border = classify::borderline_level(&prob).ok_or_else(|| {
        CliFailure::Invalid("no borderline level for this preset".to_string())
    })?;
    let eight = classify::find_figure_eight(&prob)?;
    let panel = |d: f64, kind: BranchKind| Panel {
        prob,
        d,
        kind,
        mesh,
    };
    Ok(vec![
        panel(d_oval, BranchKind::Axis),
        panel(d_simple, BranchKind::Axis),
        panel(eight, BranchKind::Axis),
        panel(d_nonsimple, BranchKind::Axis),
        panel(border, BranchKind::SepOuter),
        panel(d_orbit, BranchKind::Loop),
    ])
}

/// The eight pole-passing panels on the unit sphere; the borderline and
/// figure-eight indices are solved at runtime.
fn pole_panels() -> std::result::Result<Vec<Panel>, CliFailure> {
    let mu_border = classify::pole_borderline_mu(1.0)?;
    let mu_eight = classify::pole_figure_eight_mu(1.0)?;
    let mus = [0.15, 0.35, mu_border, 0.42, 0.499, mu_eight, 0.6, 1.0];
    let mut panels = Vec::new();
    for mu in mus {
        let prob = EnergyProblem::new(mu, 1.0)?;
        let d = classify::pole_level(&prob)?;
        let kind = phase::components(d, &prob)
            .into_iter()
            .find(|b| (b.x0 - E).abs() < 1e-6 * E)
            .ok_or(Error::NoSuchBranch {
                wanted: "pole-touching".to_string(),
                d,
            })?
            .kind;
        panels.push(Panel {
            prob,
            d,
            kind,
            mesh: false,
        });
    }
    Ok(panels)
}

fn render_panel(panel: &Panel, opts: &TraceOptions, base: &Path) -> CliResult {
    let desc = find_branch(&panel.prob, panel.d, panel.kind)?;
    let ty = classify::classify(&panel.prob, panel.d, &desc)?;
    let mut opts = *opts;
    if panel.mesh {
        opts.samples_per_half = 512;
    }
    let curve = trace::integrate_profile(&panel.prob, panel.d, &desc, &opts)?;
    if panel.mesh {
        let mesh = surface::revolve(&curve, 128, 1)?;
        let report = surface::verify_surface(&mesh);
        let obj_path = base.with_extension("obj");
        let file = fs::File::create(&obj_path).map_err(|e| io_fail(&obj_path, e))?;
        let mut out = BufWriter::new(file);
        surface::write_obj(&mesh, Projection::Drop, &mut out)
            .map_err(|e| io_fail(&obj_path, e))?;
        out.flush().map_err(|e| io_fail(&obj_path, e))?;
        write_json_file(
            &base.with_extension("json"),
            &surface::sidecar(&mesh, &report, &ty.to_string(), Projection::Drop),
        )
    } else {
        let csv_path = base.with_extension("csv");
        let file = fs::File::create(&csv_path).map_err(|e| io_fail(&csv_path, e))?;
        let mut out = BufWriter::new(file);
        trace::write_curve_csv(&curve, &mut out).map_err(|e| io_fail(&csv_path, e))?;
        out.flush().map_err(|e| io_fail(&csv_path, e))?;
        write_json_file(
            &base.with_extension("json"),
            &trace::sidecar(&curve, &ty.to_string()),
        )
    }
}

fn cmd_preset(a: PresetArgs) -> CliResult {
    let panels = match a.name.as_str() {
        "fig1" => shape_panels(1.0, 0.0, 0.5, 3.5, 1.5, 0.5, true)?,
        "fig3" => shape_panels(1.0, 0.0, 0.5, 3.5, 1.5, 0.5, false)?,
        "fig4" => shape_panels(0.25, 1.0, 0.95, 4.0, 1.5, 0.95, false)?,
        "fig5" => pole_panels()?,
        "fig6" => shape_panels(1.0, -1.0, 0.3, 8.0, 0.6, 0.3, false)?,
        other => {
            return Err(CliFailure::Invalid(format!(
                "unknown preset {other:?}; expected fig1, fig3, fig4, fig5, or fig6"
            )))
        }
    };
    fs::create_dir_all(&a.out).map_err(|e| io_fail(&a.out, e))?;
    let opts = trace_options()?;
    let mut results: Vec<CliResult> = Vec::with_capacity(panels.len());
    results.resize_with(panels.len(), || Ok(()));
    std::thread::scope(|scope| {
        for (i, (panel, slot)) in panels.iter().zip(results.iter_mut()).enumerate() {
            let base = a.out.join(format!("{}-{}", a.name, i + 1));
            let opts = &opts;
            scope.spawn(move || {
                *slot = render_panel(panel, opts, &base);
            });
        }
    });
    results.into_iter().collect()
}
