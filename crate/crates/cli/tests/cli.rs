use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn quadflight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadflight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadflight(&[
        "run",
        path_str(&scenario("hover.cfg")),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["hover.log.csv", "hover.report.json", "hover.report.txt"] {
        assert!(dir.path().join(file).is_file(), "missing {file}");
    }
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("phase"));
    assert_eq!(
        table,
        fs::read_to_string(dir.path().join("hover.report.txt")).unwrap()
    );
}

#[test]
fn metrics_reproduces_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadflight(&[
        "run",
        path_str(&scenario("hover.cfg")),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let log = dir.path().join("hover.log.csv");
    let again = quadflight(&["metrics", path_str(&log), "--format", "json"]);
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    let saved = fs::read(dir.path().join("hover.report.json")).unwrap();
    assert_eq!(again.stdout, saved);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = scenario("hover.cfg");
    for d in [&a, &b] {
        assert!(
            quadflight(&["run", path_str(&cfg), "--out", path_str(d), "--seed", "9"])
                .status
                .success()
        );
    }
    for file in ["hover.log.csv", "hover.report.json", "hover.report.txt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap()
        );
    }
}

#[test]
fn csv_format_lists_every_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadflight(&[
        "run",
        path_str(&scenario("hover.cfg")),
        "--out",
        path_str(dir.path()),
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "phase,kind,channel,mean,std,percentage");
    assert_eq!(lines.len(), 7);
}

#[test]
fn compare_writes_both_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadflight(&[
        "compare",
        path_str(&scenario("attitude_hold.cfg")),
        "--out",
        path_str(dir.path()),
        "--format",
        "json",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pitch = |who: &str| value[who][0]["channels"]["pitch"]["mean"].as_f64().unwrap();
    assert!(pitch("hybrid") < pitch("baseline"));
    for prefix in ["attitude_hold.hybrid", "attitude_hold.baseline"] {
        assert!(dir.path().join(format!("{prefix}.log.csv")).is_file());
    }
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        "[mission]\ninitial_position = [0.0, 0.0, 1.0]\nphases = [ oops\n",
    )
    .unwrap();
    let out = quadflight(&["run", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let message = String::from_utf8(out.stderr).unwrap();
    assert!(message.contains("line 3"), "{message}");
}

#[test]
fn missing_files_and_bad_logs_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(
        quadflight(&["run", path_str(&missing)]).status.code(),
        Some(3)
    );
    assert_eq!(
        quadflight(&["metrics", path_str(&missing)]).status.code(),
        Some(5)
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "not,a,log\n").unwrap();
    assert_eq!(
        quadflight(&["metrics", path_str(&bad)]).status.code(),
        Some(6)
    );
    assert_eq!(quadflight(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_simulation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unstable.cfg");
    fs::write(
        &cfg,
        r#"
[baseline_gains]
angle_p = [0.0, 0.0, 0.0]
rate_p = [0.0, 0.0, 0.0]
rate_i = [0.0, 0.0, 0.0]
rate_d = [0.0, 0.0, 0.0]

[mission]
initial_position = [0.0, 0.0, 10.0]
initial_rates = [500000.0, 0.0, 0.0]

[[mission.phases]]
name = "spin"
kind = "flight"
duration = 3.0

[mission.phases.reference]
kind = "attitude"
angles = [0.0, 0.0, 0.0]

[sim]
controller = "baseline-pid"
"#,
    )
    .unwrap();
    let out = quadflight(&["run", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
