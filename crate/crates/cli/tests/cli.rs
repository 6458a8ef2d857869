use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attractor-bounds"));
    c.env_remove("ATTRACTOR_BOUNDS_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bound_table_matches_lorenz_x() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--degrees",
        "2,4",
        "--out-dir",
        p(dir.path()),
    ]);
    assert!(out.starts_with("degree,bound,lambda,solve_ms,iterations\n"));
    let r = rows(&out);
    let b2: f64 = r[0][1].parse().unwrap();
    let b4: f64 = r[1][1].parse().unwrap();
    assert!((b2 - 3.9268).abs() < 1e-4, "{b2}");
    assert!((b4 - 2.3378).abs() < 1e-4, "{b4}");
    assert!(dir.path().join("lorenz-x-upper-d4.json").exists());
}

#[test]
fn raw_flag_undoes_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    let norm = ok(&[
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--degree",
        "2",
        "--out-dir",
        d,
    ]);
    let raw = ok(&[
        "--raw",
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--degree",
        "2",
        "--out-dir",
        d,
    ]);
    let n: f64 = rows(&norm)[0][1].parse().unwrap();
    let r: f64 = rows(&raw)[0][1].parse().unwrap();
    let kappa = (8.0f64 / 3.0 * 27.0).sqrt();
    assert!((r - n * kappa).abs() < 1e-6 * r, "{r} vs {n}");
}

#[test]
fn certificates_verify_without_the_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "xz",
        "--degree",
        "4",
        "--out-dir",
        p(dir.path()),
    ]);
    let cert = dir.path().join("lorenz-xz-upper-d4.json");
    let report = ok(&[
        "verify",
        "--certificate",
        p(&cert),
        "--samples",
        "20000",
        "--x0",
        "0.1,-0.3,20",
        "--steps",
        "20000",
    ]);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["bound_margin"].as_f64().unwrap() >= 0.0);
}

#[test]
fn corrupted_certificate_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "z",
        "--degree",
        "2",
        "--out-dir",
        p(dir.path()),
    ]);
    let path = dir.path().join("lorenz-z-upper-d2.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let c = v["c_solve"].as_f64().unwrap();
    v["c_solve"] = serde_json::json!(c - 0.1);
    v["bound"] = serde_json::json!(v["bound"].as_f64().unwrap() * (c - 0.1) / c);
    std::fs::write(&path, v.to_string()).unwrap();
    let o = run(&[
        "verify",
        "--certificate",
        p(&path),
        "--samples",
        "20000",
        "--x0",
        "1,1,1",
        "--steps",
        "20000",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["passed"], false);
    assert!(r["worst_margin"].as_f64().unwrap() < -1e-3);
}

#[test]
fn no_timing_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &str| {
        vec![
            "--no-timing".to_string(),
            "bound-local".into(),
            "--model".into(),
            "two-cycle".into(),
            "--phi".into(),
            "xy".into(),
            "--degree".into(),
            "2".into(),
            "--out-dir".into(),
            d.into(),
        ]
    };
    let run_in = |d: &Path| {
        let o = bin().args(args(p(d))).output().unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    assert_eq!(run_in(a.path()), run_in(b.path()));
    let name = "two-cycle-xy-upper-local-d2.json";
    assert_eq!(
        std::fs::read(a.path().join(name)).unwrap(),
        std::fs::read(b.path().join(name)).unwrap()
    );
}

#[test]
fn sweep_writes_lambda_c_status() {
    let out = ok(&[
        "sweep",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--degree",
        "2",
        "--lambda-grid",
        "0.6:1.6:3",
    ]);
    assert!(out.starts_with("lambda,C,status\n"));
    let r = rows(&out);
    assert_eq!(r.len(), 3);
    assert!(r.iter().all(|row| row[2] == "optimal"));
    let c: Vec<f64> = r.iter().map(|row| row[1].parse().unwrap()).collect();
    // Every lambda gives a valid bound no better than the optimum.
    assert!(c.iter().all(|v| *v >= 3.9268 - 1e-4));
}

#[test]
fn simulate_csv_and_stride() {
    let out = ok(&[
        "simulate", "--model", "lorenz", "--x0", "1,1,1", "--steps", "10", "--stride", "5",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,x,y,z");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("5.000000000000e-2,"));
}

#[test]
fn manifold_search_from_lorenz_origin() {
    let out = ok(&[
        "manifold-search",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--horizon",
        "30",
    ]);
    assert!(out.starts_with("quantity,min,max,argmin,argmax\n"));
    let r = rows(&out);
    let max: f64 = r[0][2].parse().unwrap();
    assert!((max - 2.3365).abs() < 1e-3, "{max}");
    let again = ok(&[
        "manifold-search",
        "--model",
        "lorenz",
        "--phi",
        "x",
        "--horizon",
        "30",
    ]);
    assert_eq!(out, again);
}

#[test]
fn exported_model_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("lorenz.toml");
    ok(&["export-model", "--model", "lorenz", "--output", p(&file)]);
    let from_file = ok(&[
        "--no-timing",
        "bound",
        "--model-file",
        p(&file),
        "--phi",
        "z",
        "--degree",
        "2",
        "--out-dir",
        p(dir.path()),
    ]);
    let builtin = ok(&[
        "--no-timing",
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "z",
        "--degree",
        "2",
        "--out-dir",
        p(dir.path()),
    ]);
    let a: f64 = rows(&from_file)[0][1].parse().unwrap();
    let b: f64 = rows(&builtin)[0][1].parse().unwrap();
    assert!((a - b).abs() < 1e-8);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "command = \"bound\"\nmodel = \"lorenz\"\nquantities = [\"x\"]\ndegrees = [4]\nout-dir = \"{}\"\n",
            p(dir.path())
        ),
    )
    .unwrap();
    let out = ok(&["--config", p(&cfg)]);
    let b: f64 = rows(&out)[0][1].parse().unwrap();
    assert!((b - 2.3378).abs() < 1e-4);
    let over = ok(&["--config", p(&cfg), "bound", "--degrees", "2"]);
    assert_eq!(rows(&over)[0][0], "2");
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "command = \"bound\"\nmodel = \"lorenz\"\nquantities = [\"x\"]\ndegrees = [3]\n",
    )
    .unwrap();
    let o = run(&["--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`degrees`"), "{err}");

    let o = run(&[
        "bound",
        "--model",
        "lorenz",
        "--phi",
        "nonsense(",
        "--degree",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`quantities`"));

    let o = run(&[
        "bound", "--model", "lorenz", "--param", "rho=3", "--phi", "x", "--degree", "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`parameters`"));
}
