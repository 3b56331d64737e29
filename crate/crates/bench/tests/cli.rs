use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dppm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dppm"))
        .args(args)
        .current_dir(dir)
        .env_remove("DPPM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn quadratic_minimize_halves_each_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppm(
        dir.path(),
        &["minimize", "--objective", "quadratic", "--diag", "2", "--init", "1", "--convex-lambda", "0.5"],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,f,grad_norm,w,t,direction,x0"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let k: i32 = cols[0].parse().unwrap();
        let x: f64 = cols[6].parse().unwrap();
        assert!((x - 0.5f64.powi(k)).abs() <= 1e-9 * 0.5f64.powi(k));
    }
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["status"], "converged");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dppm(dir.path(), &["minimize"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["validate", "--suite", "lemma9"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["minimize", "--objective", "quadratic"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["bench-quadratic", "--spectrum", "0:1", "--dim", "3"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["bench-quadratic", "--schedule", "0.1,1", "--dim", "3"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(dppm(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn run_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppm(dir.path(), &["minimize", "--objective", "sinewell", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("\"status\":\"max_iter\""));
}

#[test]
fn csv_rows_match_recorded_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppm(dir.path(), &["bench-quadratic", "--dim", "40", "--cycles", "7", "--lambda", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("quadratic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.starts_with("cycle,q_ratio,bound\n"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# rate run\ndim = 5\niters = 30\naccelerate = true\nout = a.csv\n").unwrap();
    let o = dppm(dir.path(), &["bench-convex-rate", "--config", "run.cfg", "--iters", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(stdout(&o).contains("\"accelerated\":true"));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dppm"));
        c.args(["bench-quadratic", "--dim", "10", "--cycles", "2", "--out", out]).current_dir(dir.path());
        match seed {
            Some(s) => c.env("DPPM_SEED", s),
            None => c.env_remove("DPPM_SEED"),
        };
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        fs::read(dir.path().join(out)).unwrap()
    };
    let env7 = run(Some("7"), "a.csv");
    let flag7 = {
        let o = dppm(dir.path(), &["bench-quadratic", "--dim", "10", "--cycles", "2", "--seed", "7", "--out", "b.csv"]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(dir.path().join("b.csv")).unwrap()
    };
    assert_eq!(env7, flag7);
    assert_ne!(env7, run(None, "c.csv"));
}

#[test]
fn nonconvex_bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bench-nonconvex", "--strategies", "gradient,momentum", "--repeats", "2", "--seed", "11"];
    let a = dppm(dir.path(), &[&args[..], &["--out", "a.csv"]].concat());
    let b = dppm(dir.path(), &[&args[..], &["--out", "b.csv"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("strategy,run,iter,error\n"));
}

#[test]
fn single_validate_suite_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppm(dir.path(), &["validate", "--suite", "lemma8", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(rep["suite"], "lemma8");
    assert_eq!(rep["checked"], 300);
    assert_eq!(rep["violations"], 0);
}
