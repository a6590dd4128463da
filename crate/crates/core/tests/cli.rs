use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use thomas::io::Metadata;
use thomas::schema::{validate_csv, validate_json, CsvKind, JsonKind};

fn thomas(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thomas"))
        .args(args)
        .current_dir(dir)
        .env_remove("THOMAS_OUT_DIR")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str], dir: &Path) {
    let out = thomas(args, dir);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Re-runs the command recorded in the metadata and compares bytes.
fn assert_reproducible(meta: &Metadata, original: &[u8], dir: &Path) {
    let mut args: Vec<&str> = meta.command.split(' ').skip(1).collect();
    args.extend(["--out", "again.out"]);
    run_ok(&args, dir);
    assert_eq!(fs::read(dir.join("again.out")).unwrap(), original, "{}", meta.command);
}

fn check_csv(args: &[&str], kind: CsvKind) -> thomas::schema::CsvFile {
    let dir = tempfile::tempdir().unwrap();
    let mut full = args.to_vec();
    full.extend(["--out", "out.csv"]);
    run_ok(&full, dir.path());
    let bytes = fs::read(dir.path().join("out.csv")).unwrap();
    let file = validate_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(file.kind, kind);
    assert_reproducible(file.meta.as_ref().unwrap(), &bytes, dir.path());
    file
}

fn check_json(args: &[&str], kind: JsonKind) -> serde_json::Value {
    let dir = tempfile::tempdir().unwrap();
    let mut full = args.to_vec();
    full.extend(["--out", "out.json"]);
    run_ok(&full, dir.path());
    let bytes = fs::read(dir.path().join("out.json")).unwrap();
    let text = std::str::from_utf8(&bytes).unwrap();
    let (k, meta) = validate_json(text).unwrap();
    assert_eq!(k, kind);
    assert_reproducible(&meta, &bytes, dir.path());
    serde_json::from_str(text).unwrap()
}

#[test]
fn simulate_writes_trajectory() {
    let f = check_csv(&["simulate", "--b", "0.19", "--x0", "1", "--y0", "1", "--z0", "-1", "--t-end", "2000"], CsvKind::Trajectory);
    assert_eq!(f.rows.len(), 200_001);
    check_csv(&["simulate", "--method", "rk45", "--t-end", "50", "--b", "0.3"], CsvKind::Trajectory);
}

#[test]
fn fixed_points_and_bifurcations() {
    let v = check_json(&["fixed-points", "--b", "0.128"], JsonKind::FixedPoints);
    assert_eq!(v["equilibria"].as_array().unwrap().len(), 7);
    let f = check_csv(&["bifurcations", "--n-max", "4"], CsvKind::Events);
    let find = |kind: &str, b: f64, tol: f64| {
        f.rows.iter().any(|r| r[0] == kind && (r[1].parse::<f64>().unwrap() - b).abs() < tol)
    };
    assert!(find("HOPF", 0.329, 1e-3));
    assert!(find("DOUBLE_SADDLE_NODE", 0.1283, 1e-3));
}

#[test]
fn analysis_outputs_validate() {
    check_csv(&["lyapunov", "--b", "0.3", "--t-end", "300", "--transient", "50"], CsvKind::Scan);
    check_csv(
        &["lyapunov", "--b-lo", "0.3", "--b-hi", "0.4", "--n-b", "3", "--t-end", "200", "--transient", "20"],
        CsvKind::Scan,
    );
    check_csv(&["section", "--n-init", "4", "--t-end", "200", "--max-hits-per-init", "2"], CsvKind::Section);
    check_csv(&["sweep", "--b-lo", "0.3", "--b-hi", "0.45", "--n-b", "4", "--t-end", "300", "--transient", "100", "--hits-per-b", "10"], CsvKind::Sweep);
    check_json(&["walk", "--density", "--n", "200", "--density-t-end", "10"], JsonKind::Density);
}

#[test]
fn walk_stats_reports_mean_speed() {
    let v = check_json(&["walk", "--stats", "--t-end", "50000"], JsonKind::WalkStats);
    let speed = v["mean_speed"].as_f64().unwrap();
    assert!((speed / 1.5f64.sqrt() - 1.0).abs() < 0.02, "{speed}");
}

#[test]
fn domain_errors_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    for (args, flag) in [
        (vec!["simulate", "--b", "-0.1"], "--b"),
        (vec!["simulate", "--step", "0.5"], "--step"),
        (vec!["section", "--b", "0"], "--b"),
        (vec!["sweep", "--n-b", "1"], "--n-b"),
        (vec!["lyapunov", "--b-lo", "0.5", "--b-hi", "0.4"], "--b-hi"),
        (vec!["walk", "--b", "0.2"], "--b"),
    ] {
        let out = thomas(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(flag), "{args:?}");
    }
    assert_eq!(thomas(&["simulate", "--bogus"], dir.path()).status.code(), Some(2));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // too short for any speed statistics
    let out = thomas(&["walk", "--t-end", "100", "--min-lag", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--b", "0.19", "--t-end", "100"];
    run_ok(&[&args[..], &["--out", "a.csv"]].concat(), dir.path());
    run_ok(&[&args[..], &["--out", "b.csv"]].concat(), dir.path());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let section = ["section", "--n-init", "6", "--t-end", "150", "--seed", "3"];
    let sweep = ["sweep", "--policy", "fixed", "--b-lo", "0.2", "--b-hi", "0.3", "--n-b", "5", "--t-end", "300", "--transient", "50"];
    for (name, args) in [("section", &section[..]), ("sweep", &sweep[..])] {
        let one = format!("{name}1.csv");
        let four = format!("{name}4.csv");
        run_ok(&[args, &["--threads", "1", "--out", &one]].concat(), dir.path());
        run_ok(&[args, &["--threads", "4", "--out", &four]].concat(), dir.path());
        assert_eq!(fs::read(dir.path().join(one)).unwrap(), fs::read(dir.path().join(four)).unwrap());
    }
}

#[test]
fn default_output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("outputs");
    let out = Command::new(env!("CARGO_BIN_EXE_thomas"))
        .args(["bifurcations"])
        .current_dir(dir.path())
        .env("THOMAS_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("bifurcations.csv").exists());
    run_ok(&["bifurcations"], dir.path());
    assert!(dir.path().join("bifurcations.csv").exists());
}

#[test]
fn stdout_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = thomas(&["bifurcations", "--n-max", "1", "--out", "-"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(validate_csv(&text).unwrap().rows.len(), 3);
}
