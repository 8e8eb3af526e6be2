use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use farmsim::cli::output::TRACE_HEADER;

fn farmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_farmsim"))
        .args(args)
        .output()
        .expect("spawn farmsim")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn sweep_into(dir: &Path, extra: &[&str]) -> (Vec<u8>, Vec<u8>) {
    let cfg = golden("small.toml");
    let mut args = vec!["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = farmsim(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (
        fs::read(dir.join("sweep.csv")).unwrap(),
        fs::read(dir.join("optimum.csv")).unwrap(),
    )
}

#[test]
fn check_accepts_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "").unwrap();
    let out = farmsim(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(farmsim(&["check"]).status.code(), Some(0));
}

#[test]
fn zero_ticks_is_a_config_error() {
    let out = farmsim(&["run", "--ticks", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ticks"));
}

#[test]
fn bad_config_reports_key_and_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[engine]\nerror_rte = 0.1\n").unwrap();
    let out = farmsim(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error_rte") && err.contains("error_rate"), "{err}");

    fs::write(&path, "[scheduler]\nd = -1.0\n").unwrap();
    let out = farmsim(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(farmsim(&["sweep", "--parallel", "0"]).status.code(), Some(1));
    assert_eq!(farmsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(farmsim(&["run", "--seed", "0", "0"]).status.code(), Some(1));
}

#[test]
fn sweep_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let (cells, opt) = sweep_into(dir.path(), &["--parallel", "2"]);
    assert_eq!(String::from_utf8(cells).unwrap(), fs::read_to_string(golden("small.sweep.csv")).unwrap());
    assert_eq!(String::from_utf8(opt).unwrap(), fs::read_to_string(golden("small.optimum.csv")).unwrap());
}

#[test]
fn sweep_output_independent_of_workers_and_quiet() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let seq = sweep_into(a.path(), &["--parallel", "1"]);
    let par = sweep_into(b.path(), &["--parallel", "4"]);
    let quiet = sweep_into(c.path(), &["--parallel", "3", "--quiet"]);
    assert_eq!(seq, par);
    assert_eq!(seq, quiet);
}

#[test]
fn quiet_silences_informational_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden("small.toml");
    let out = farmsim(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty());
}

#[test]
fn sweep_overrides_collapse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (cells, opt) = sweep_into(dir.path(), &["--d", "0.03", "--error-rate", "0.05"]);
    let cells = String::from_utf8(cells).unwrap();
    // one d, one error rate, two replicates
    assert_eq!(cells.lines().count(), 3);
    assert!(cells.lines().skip(1).all(|l| l.starts_with("0.05,0.03,")));
    let mean: f64 = cells
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .sum::<f64>()
        / 2.0;
    let opt = String::from_utf8(opt).unwrap();
    assert_eq!(opt.lines().nth(1), Some(format!("0.05,0.03,{mean}").as_str()));
}

#[test]
fn run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let cfg = golden("small.toml");
    let out = farmsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--ticks",
        "50",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("crossings_processed"));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    // 3 farmlets × 4 DSPs × 50 ticks
    assert_eq!(lines.count(), 600);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = farmsim(&["sweep", "--ticks", "10", "--d", "0.1", "--error-rate", "0.01", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
