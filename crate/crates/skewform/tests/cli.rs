//! End-to-end checks of the command-line binary: exit codes, stdout and
//! stderr formats, file outputs, and determinism across reruns.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewform"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_error_kind(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8");
    let doc: Value = serde_json::from_str(text.trim()).expect("stderr is one JSON document");
    doc["error"]["kind"].as_str().expect("kind is a string").to_string()
}

#[test]
fn special_borderline_flat_prints_the_flat_level() {
    let out = run(&["special", "--rho", "0", "--mu", "1", "--kind", "borderline"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1");
}

#[test]
fn special_figure_eight_matches_reference_levels() {
    let out = run(&["special", "--rho", "0", "--mu", "1", "--kind", "figure-eight"]);
    assert!(out.status.success());
    let d: f64 = stdout(&out).trim().parse().unwrap();
    assert!((d - 2.8512381451740055).abs() < 1e-10);

    let out = run(&["special", "--rho", "-1", "--mu", "1", "--kind", "figure-eight"]);
    assert!(out.status.success());
    let d: f64 = stdout(&out).trim().parse().unwrap();
    assert!((d - 4.3584416811985804).abs() < 1e-10);
}

#[test]
fn special_pole_needs_a_sphere() {
    let out = run(&["special", "--rho", "0", "--mu", "1", "--kind", "pole"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_kind(&out), "validation");
}

#[test]
fn special_figure_eight_reports_numeric_failure_when_absent() {
    // above the pole transition the junction angle never crosses zero
    let out = run(&["special", "--rho", "1", "--mu", "0.6", "--kind", "figure-eight"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error_kind(&out), "numeric");
}

#[test]
fn degenerate_index_is_a_validation_error() {
    let out = run(&["classify", "--rho", "0", "--mu", "0", "--d", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_kind(&out), "validation");
}

#[test]
fn unknown_flag_exits_with_the_validation_code() {
    let out = run(&["classify", "--rho", "0", "--mu", "1", "--d", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("trace"));
}

#[test]
fn classify_prints_branch_type_json() {
    let out = run(&["classify", "--rho", "0", "--mu", "1", "--d", "1.5", "--branch", "axis"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(doc["type"], "non-simple-biconcave");

    let out = run(&["classify", "--rho", "1", "--mu", "0.75", "--d", "5"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let list = doc.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["branch"], "axis");
    assert_ne!(list[0]["type"], "borderline");
    assert_ne!(list[0]["type"], "orbit-like");
}

#[test]
fn classify_missing_branch_is_a_validation_error() {
    // d = 2 on the flat problem lies above the separatrix: no loop exists
    let out = run(&["classify", "--rho", "0", "--mu", "1", "--d", "2", "--branch", "loop"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_kind(&out), "validation");
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("file exists")
}

#[test]
fn trace_writes_deterministic_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("oval.csv");
    let args = [
        "trace", "--rho", "0", "--mu", "1", "--d", "0.5", "--branch", "axis", "--samples",
        "128", "--out",
    ];
    let out = run(&args.iter().copied().chain([csv.to_str().unwrap()]).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let first_csv = read(&csv);
    let side = dir.path().join("oval.json");
    let first_side = read(&side);

    let lines: Vec<&str> = first_csv.lines().collect();
    assert_eq!(lines[0], "s,x,y,kappa,psi,px,py,pz");
    // two limit samples plus 2 * 128 - 1 uniform interior samples
    assert_eq!(lines.len(), 1 + 2 + 255);

    let meta: Value = serde_json::from_str(&first_side).unwrap();
    assert_eq!(meta["type"], "oval");
    assert_eq!(meta["branch"], "axis");
    assert!(meta["drift_max"].as_f64().unwrap() < 1e-8);

    let out = run(&args.iter().copied().chain([csv.to_str().unwrap()]).collect::<Vec<_>>());
    assert!(out.status.success());
    assert_eq!(read(&csv), first_csv, "trace output must be byte-identical");
    assert_eq!(read(&side), first_side, "sidecar must be byte-identical");
}

#[test]
fn verify_accepts_a_fresh_trace_and_rejects_a_tampered_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let out = run(&[
        "trace", "--rho", "1", "--mu", "0.25", "--d", "0.95", "--branch", "axis", "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["verify", "--in", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(doc["ok"], true);
    assert!(doc["drift_max"].as_f64().unwrap() < 1e-8);

    // corrupt one slope field away from the symmetry centre, where the
    // slope is of order one, and expect a numeric failure
    let text = read(&csv);
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mid = lines.len() / 4;
    let mut fields: Vec<String> = lines[mid].split(',').map(str::to_string).collect();
    let y: f64 = fields[2].parse().unwrap();
    fields[2] = format!("{}", y + 1e-4);
    lines[mid] = fields.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();

    let out = run(&["verify", "--in", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let doc: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(doc["ok"], false);
}

#[test]
fn tolerance_override_is_deterministic_and_changes_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let default_csv = dir.path().join("default.csv");
    let loose_csv = dir.path().join("loose.csv");
    let loose_again = dir.path().join("loose2.csv");
    let args = |out: &Path| {
        vec![
            "trace".to_string(),
            "--rho".into(), "0".into(),
            "--mu".into(), "1".into(),
            "--d".into(), "1.5".into(),
            "--branch".into(), "axis".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let out = bin().args(args(&default_csv)).output().unwrap();
    assert!(out.status.success());
    let out = bin().args(args(&loose_csv)).env("SKEWFORM_TOL", "1e-5").output().unwrap();
    assert!(out.status.success());
    let out = bin().args(args(&loose_again)).env("SKEWFORM_TOL", "1e-5").output().unwrap();
    assert!(out.status.success());

    assert_eq!(read(&loose_csv), read(&loose_again));
    assert_ne!(read(&default_csv), read(&loose_csv));

    let meta: Value = serde_json::from_str(&read(&dir.path().join("loose.json"))).unwrap();
    let drift = meta["drift_max"].as_f64().unwrap();
    assert!(drift > 1e-11, "loose tolerance should show in the drift, got {drift}");

    // the variable is validated where it is consumed
    let out = bin()
        .args(args(&loose_again))
        .env("SKEWFORM_TOL", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(args(&loose_again))
        .env("SKEWFORM_TOL", "0.5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_the_grid_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--rho", "1", "--mu-range", "0.5:2:4", "--d-range", "1:9:3", "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho,mu,d,branch,type,qualifier,x0,psi0");
    // no saddle anywhere on this grid: one axis branch per point
    assert_eq!(lines.len(), 1 + 4 * 3);
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[0], "1");
        assert_eq!(fields[3], "axis");
        assert!(fields[4] != "borderline" && fields[4] != "orbit-like");
    }
    let mu_first: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let mu_last: f64 = lines[12].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(mu_first, 0.5);
    assert_eq!(mu_last, 2.0);
}

#[test]
fn sweep_rejects_malformed_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--rho", "1", "--mu-range", "0.5:2", "--d-range", "1:9:3", "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_kind(&out), "validation");
}

#[test]
fn surface_writes_an_obj_mesh_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("ovaloid.obj");
    let out = run(&[
        "surface", "--rho", "0", "--mu", "1", "--d", "0.5", "--branch", "axis", "--rings",
        "64", "--slices", "24", "--out", obj.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&obj);
    assert!(text.starts_with("v "));
    assert!(text.contains("\nf "));
    let meta: Value = serde_json::from_str(&read(&dir.path().join("ovaloid.json"))).unwrap();
    assert_eq!(meta["type"], "oval");
    assert_eq!(meta["projection"], "drop");
    assert_eq!(meta["resolution"][1], 24);
    assert!(meta["max_residuals"]["skew"].as_f64().unwrap() < 1e-8);

    let out = run(&[
        "surface", "--rho", "0", "--mu", "1", "--d", "0.5", "--branch", "axis",
        "--projection", "sideways", "--out", obj.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phase_portrait_document_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("portrait.json");
    let out = run(&[
        "phase", "--rho", "0", "--mu", "1", "--d", "0.5", "--d", "1", "--d", "2",
        "--samples", "64", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&read(&path)).unwrap();
    assert_eq!(doc["levels"].as_array().unwrap().len(), 3);
    assert_eq!(doc["stationary"]["regime"], "two-points");
    assert_eq!(doc["stationary"]["points"].as_array().unwrap().len(), 2);

    // default levels bracket the separatrix when one exists
    let out = run(&["phase", "--rho", "0", "--mu", "1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&read(&path)).unwrap();
    let ds: Vec<f64> = doc["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["d"].as_f64().unwrap())
        .collect();
    assert_eq!(ds, vec![0.5, 1.0, 2.0]);
}

#[test]
fn preset_fig3_regenerates_the_panel_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["preset", "--name", "fig3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let expected = [
        ("fig3-1", "oval"),
        ("fig3-2", "simple-biconcave"),
        ("fig3-3", "figure-eight"),
        ("fig3-4", "non-simple-biconcave"),
        ("fig3-5", "borderline"),
        ("fig3-6", "orbit-like"),
    ];
    for (stem, ty) in expected {
        let csv = dir.path().join(format!("{stem}.csv"));
        assert!(csv.exists(), "{stem}.csv missing");
        let meta: Value =
            serde_json::from_str(&read(&dir.path().join(format!("{stem}.json")))).unwrap();
        assert_eq!(meta["type"], ty, "{stem}");
        assert_eq!(meta["rho"], 0.0);
        assert_eq!(meta["mu"], 1.0);
    }
    let count = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(count, 12);
}

#[test]
fn preset_fig5_panels_all_pass_the_pole() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["preset", "--name", "fig5", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = [
        "orbit-like (pole-passing)",
        "orbit-like (pole-passing)",
        "borderline (pole-passing)",
        "non-simple-biconcave (pole-passing)",
        "non-simple-biconcave (pole-passing)",
        "figure-eight (pole-passing)",
        "simple-biconcave (pole-passing)",
        "oval (pole-passing)",
    ];
    for (i, ty) in expected.iter().enumerate() {
        let meta: Value =
            serde_json::from_str(&read(&dir.path().join(format!("fig5-{}.json", i + 1))))
                .unwrap();
        assert_eq!(meta["type"].as_str().unwrap(), *ty, "panel {}", i + 1);
    }

    let out = run(&["preset", "--name", "fig9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
