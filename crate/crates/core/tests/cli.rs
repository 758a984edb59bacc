//! End-to-end runs of the `membrane-bm` binary.

use std::path::Path;
use std::process::{Command, Output};

use membrane_bm::density::skew_density;
use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::stats::{ks_two_sample, mean_z};
use nalgebra::{DMatrix, DVector};
use tempfile::TempDir;

const CORRELATED: &str = r#"{"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 0.5, "alpha": [0.0, 0.0]}"#;
const IDENTITY_FREE: &str = r#"{"d": 2, "B": [1.0, 0.0, 0.0, 1.0], "nu": [0.0, 1.0], "q": 0.0, "alpha": [0.0, 0.0]}"#;

fn run(dir: &Path, args: &[&str], config: &str, threads: Option<&str>) -> Output {
    let cfg = dir.join(format!("config-{}.json", args.join("-").replace(['/', '.'], "_")));
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_membrane-bm"));
    cmd.arg(args[0]).arg("--config").arg(&cfg).args(&args[1..]);
    if let Some(t) = threads {
        cmd.env("MEMBRANE_BM_THREADS", t);
    }
    cmd.output().unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, body)
}

#[test]
fn density_grid_integrates_to_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.csv");
    let cfg = format!(
        r#"{{"model": {IDENTITY_FREE}, "t": 1.0, "x": [0.0, 0.5],
            "grid": [{{"min": -5.0, "max": 5.0, "count": 21}}, {{"min": -4.5, "max": 5.5, "count": 21}}]}}"#
    );
    let o = run(dir.path(), &["density", "--out", out.to_str().unwrap()], &cfg, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, body) = rows(&out);
    assert_eq!(header, ["y_1", "y_2", "G"]);
    assert_eq!(body.len(), 441);
    assert_eq!((body[0][0], body[0][1]), (-5.0, -4.5));
    assert_eq!((body[1][0], body[1][1]), (-5.0, -4.0));
    let mass: f64 = body.iter().map(|r| r[2]).sum::<f64>() * 0.5 * 0.5;
    assert!((mass - 1.0).abs() < 1e-2, "{mass}");
}

#[test]
fn density_without_drift_matches_skew_density() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.csv");
    let cfg = format!(
        r#"{{"model": {CORRELATED}, "t": 0.5, "x": [0.2, -0.3],
            "grid": [{{"min": -2.0, "max": 2.0, "count": 9}}, {{"min": -2.0, "max": 2.0, "count": 9}}]}}"#
    );
    let o = run(dir.path(), &["density", "--out", out.to_str().unwrap()], &cfg, None);
    assert_eq!(o.status.code(), Some(0));
    let p = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 0.5, DVector::zeros(2)).unwrap();
    let dec = build_decomposition(&p).unwrap();
    let x = DVector::from_vec(vec![0.2, -0.3]);
    for r in rows(&out).1 {
        let y = DVector::from_vec(vec![r[0], r[1]]);
        assert!((r[2] - skew_density(0.5, &x, &y, &dec, 0.5).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn malformed_inputs_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let empty_axis = format!(
        r#"{{"model": {CORRELATED}, "t": 1.0, "x": [0.0, 0.5],
            "grid": [{{"min": -1.0, "max": 1.0, "count": 0}}, {{"min": -1.0, "max": 1.0, "count": 3}}]}}"#
    );
    assert_eq!(run(dir.path(), &["density"], &empty_axis, None).status.code(), Some(2));
    let no_samples = format!(r#"{{"model": {CORRELATED}, "t": 1.0, "x": [0.0, 0.5], "n": 0}}"#);
    assert_eq!(run(dir.path(), &["sample"], &no_samples, None).status.code(), Some(2));
    let bad_grid = format!(r#"{{"model": {CORRELATED}, "t": [0.5, 0.5, 1.0], "x": [0.0, 0.5]}}"#);
    assert_eq!(run(dir.path(), &["path"], &bad_grid, None).status.code(), Some(2));
    let bad_q = r#"{"model": {"d": 2, "B": [1.0, 0.0, 0.0, 1.0], "nu": [0.0, 1.0], "q": 1.5, "alpha": [0.0, 0.0]}, "suite": "pde"}"#;
    let o = run(dir.path(), &["verify"], bad_q, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert_eq!(run(dir.path(), &["verify"], r#"{"suite": "nope"}"#, None).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["verify", "--format", "csv"], r#"{"suite": "reductions"}"#, None).status.code(), Some(2));
    let mismatch = format!(r#"{{"model": {CORRELATED}, "run": "sample", "t": 1.0, "x": [0.0, 0.5]}}"#);
    assert_eq!(run(dir.path(), &["path"], &mismatch, None).status.code(), Some(2));
    let sample = format!(r#"{{"model": {CORRELATED}, "t": 1.0, "x": [0.0, 0.5]}}"#);
    assert_eq!(run(dir.path(), &["sample"], &sample, Some("zero")).status.code(), Some(2));
}

#[test]
fn samples_are_reproducible_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"model": {CORRELATED}, "t": 1.0, "x": [0.0, 0.5], "n": 10000, "seed": 5}}"#);
    let a = run(dir.path(), &["sample"], &cfg, Some("1"));
    let b = run(dir.path(), &["sample"], &cfg, Some("3"));
    let c = run(dir.path(), &["sample", "--seed", "6"], &cfg, None);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 10_001);
}

#[test]
fn full_reflection_never_crosses() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = r#"{"model": {"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 1.0, "alpha": [0.8, 0.0]},
                  "t": 1.0, "x": [0.0, 0.1], "n": 20000}"#;
    let o = run(dir.path(), &["sample", "--out", out.to_str().unwrap()], cfg, None);
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&out);
    assert_eq!(header, ["y_1", "y_2", "theta", "hit"]);
    assert!(body.iter().any(|r| r[3] == 1.0));
    assert!(body.iter().all(|r| !(r[3] == 1.0 && r[1] < 0.0)));
}

#[test]
fn local_time_mean_from_the_command_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = format!(r#"{{"model": {IDENTITY_FREE}, "t": 1.0, "x": [0.3, 0.0], "n": 100000, "seed": 17}}"#);
    assert_eq!(run(dir.path(), &["sample", "--out", out.to_str().unwrap()], &cfg, None).status.code(), Some(0));
    let theta: Vec<f64> = rows(&out).1.iter().map(|r| r[2]).collect();
    let (_, _, z) = mean_z(&theta, (2.0 / std::f64::consts::PI).sqrt());
    assert!(z.abs() < 3.0, "{z}");
}

#[test]
fn paths_have_monotone_local_time() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.csv");
    let cfg = r#"{"model": {"d": 3, "B": [1.0, 0.2, 0.0, 0.2, 1.0, 0.3, 0.0, 0.3, 1.5], "nu": [0.0, 0.0, 1.0], "q": -0.3, "alpha": [0.5, -0.5, 0.0]},
                  "t": [0.25, 0.5, 0.75, 1.0], "x": [0.0, 0.0, 0.05], "n": 500, "output": {"format": "csv"}}"#;
    assert_eq!(run(dir.path(), &["path", "--out", out.to_str().unwrap()], cfg, None).status.code(), Some(0));
    let (header, body) = rows(&out);
    assert_eq!(header, ["path", "t", "x_1", "x_2", "x_3", "eta"]);
    assert_eq!(body.len(), 500 * 5);
    for path in body.chunks(5) {
        assert_eq!(path[0][1], 0.0);
        assert!(path.windows(2).all(|w| w[0][0] == w[1][0] && w[1][5] >= w[0][5]));
    }
}

#[test]
fn free_increments_have_covariance_dt_b() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.csv");
    let cfg = r#"{"model": {"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 0.0, "alpha": [0.0, 0.0]},
                  "t": [0.5], "x": [0.0, 0.3], "n": 20000, "seed": 3}"#;
    assert_eq!(run(dir.path(), &["path", "--out", out.to_str().unwrap()], cfg, None).status.code(), Some(0));
    let body = rows(&out).1;
    let inc: Vec<[f64; 2]> = body.chunks(2).map(|p| [p[1][2] - p[0][2], p[1][3] - p[0][3]]).collect();
    let b = [[2.0, 1.0], [1.0, 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            let prods: Vec<f64> = inc.iter().map(|v| v[i] * v[j]).collect();
            let (_, _, z) = mean_z(&prods, 0.5 * b[i][j]);
            assert!(z.abs() < 3.0, "({i}, {j}): z = {z}");
        }
    }
}

#[test]
fn refined_grid_gives_the_same_endpoint_law() {
    let dir = TempDir::new().unwrap();
    let (one, two) = (dir.path().join("one.csv"), dir.path().join("two.csv"));
    let model = r#"{"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 0.5, "alpha": [0.8, 0.0]}"#;
    let a = format!(r#"{{"model": {model}, "t": [1.0], "x": [0.0, 0.2], "n": 10000, "seed": 1}}"#);
    let b = format!(r#"{{"model": {model}, "t": [0.5, 1.0], "x": [0.0, 0.2], "n": 10000, "seed": 2}}"#);
    assert_eq!(run(dir.path(), &["path", "--out", one.to_str().unwrap()], &a, None).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["path", "--out", two.to_str().unwrap()], &b, None).status.code(), Some(0));
    let end = |p: &Path, k: usize, per: usize| -> Vec<f64> { rows(p).1.chunks(per).map(|r| r[per - 1][k]).collect() };
    for k in [2, 3, 4] {
        let ks = ks_two_sample(&end(&one, k, 2), &end(&two, k, 3));
        assert!(ks.p_value > 0.01, "column {k}: {ks:?}");
    }
}

#[test]
fn verify_reductions_passes_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.jsonl");
    let cfg = r#"{"run": "verify", "suite": "reductions", "seed": 42}"#;
    let a = run(dir.path(), &["verify", "--out", out.to_str().unwrap()], cfg, None);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let first = std::fs::read(&out).unwrap();
    assert!(String::from_utf8_lossy(&a.stdout).contains("0 failed"));
    let b = run(dir.path(), &["verify", "--out", out.to_str().unwrap()], cfg, Some("2"));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(first, std::fs::read(&out).unwrap());
    let lines = String::from_utf8(first).unwrap();
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn verify_reports_failures_with_exit_1() {
    // valid settings, but tolerances no single panel can meet
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"suite": "reductions", "t": 1.0,
                  "model": {"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 0.5, "alpha": [0.8, 0.0]},
                  "quad": {"rel_tol": 1e-300, "abs_tol": 1e-300, "max_panels": 1}}"#;
    let o = run(dir.path(), &["verify"], cfg, None);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    assert!(stdout.contains("\"passed\":false"));
}
