use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hdbprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdbprep")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--seed", "5", "--households", "25", "--out-dir", s(dir)];
    args.extend(extra);
    let out = hdbprep(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_inputs_config_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--table"]);
    for f in [
        "region.txt",
        "milieu.txt",
        "cluster.txt",
        "household.txt",
        "age.txt",
        "gender.txt",
        "poswrchief.txt",
        "income.txt",
        "groundtruth.csv",
        "hdbprep.toml",
        "persons.csv",
    ] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let truth = fs::read_to_string(tmp.path().join("groundtruth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 26);
}

#[test]
fn run_reports_on_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--anomalies"]);
    let out = hdbprep(&["run", "--config", s(&tmp.path().join("hdbprep.toml"))]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("households: 25"), "{stdout}");
    assert!(stdout.contains("2 chiefs, last one kept"), "{stdout}");
    assert!(tmp.path().join("out/households.csv").is_file());
}

#[test]
fn run_matches_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--anomalies", "--renumber"]);
    let out = hdbprep(&["run", "--config", s(&tmp.path().join("hdbprep.toml"))]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(tmp.path().join("out/households.csv")).unwrap(),
        fs::read_to_string(tmp.path().join("groundtruth.csv")).unwrap()
    );
}

#[test]
fn cli_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let out_dir = tmp.path().join("custom");
    let out = hdbprep(&[
        "run",
        "--config",
        s(&tmp.path().join("hdbprep.toml")),
        "--out-dir",
        s(&out_dir),
        "--dmp-c",
        "0.3",
        "--dmp-s",
        "1",
        "--scale",
        "dmp",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("scaleDMP-0.3-1.txt").is_file());
    let table = fs::read_to_string(out_dir.join("households.csv")).unwrap();
    for row in table.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let (adults, children): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let dmp: f64 = f[6].parse().unwrap();
        assert!((dmp - (adults + 0.3 * children)).abs() < 1e-9);
        let (total, scaled): (f64, f64) = (f[7].parse().unwrap(), f[8].parse().unwrap());
        assert!((scaled - total / dmp).abs() <= 1e-6 * total.max(1.0));
    }
}

#[test]
fn data_error_exits_1_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let age = tmp.path().join("age.txt");
    let mut lines: Vec<String> = fs::read_to_string(&age).unwrap().lines().map(String::from).collect();
    lines[6] = "abc".into();
    fs::write(&age, lines.join("\n") + "\n").unwrap();
    let out = hdbprep(&["run", "--config", s(&tmp.path().join("hdbprep.toml"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 7"), "{stderr}");

    let out = hdbprep(&["run", "--config", s(&tmp.path().join("hdbprep.toml")), "--paper-sentinel"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_and_io_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = hdbprep(&["run", "--config", s(&tmp.path().join("none.toml"))]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[scales]\ndmp_s = 3\n").unwrap();
    assert_eq!(hdbprep(&["run", "--config", s(&bad)]).status.code(), Some(2));

    fs::write(&bad, "[encoding]\ngender = \"9\"\n").unwrap();
    assert_eq!(hdbprep(&["run", "--config", s(&bad)]).status.code(), Some(2));

    synth(tmp.path(), &[]);
    let out = hdbprep(&["aggregate", "--config", s(&tmp.path().join("hdbprep.toml"))]);
    assert_eq!(out.status.code(), Some(2), "aggregate before identify");
}

#[test]
fn single_precision_flag() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let out = hdbprep(&["run", "--config", s(&tmp.path().join("hdbprep.toml")), "--f32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("out/scaleDMP-0.5-0.7.txt").is_file());
}
