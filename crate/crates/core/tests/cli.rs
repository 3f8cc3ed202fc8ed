use std::path::Path;
use std::process::{Command, Output};

fn hmcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmcf")).args(args).output().unwrap()
}

fn out_dir(dir: &Path) -> String {
    format!("output_dir={}", dir.display())
}

#[test]
fn oracle_reports_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmcf(&["oracle", "--set", &out_dir(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("t0 = 1.2533")), "{stdout}");
    assert!(dir.path().join("oracle.csv").exists());
}

#[test]
fn flat_band_finishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmcf(&[
        "simulate",
        "--set",
        "geometry=flat_band",
        "--set",
        "n=16",
        "--set",
        "t_end=0.1",
        "--set",
        &out_dir(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_exits_64_and_lists_every_error() {
    let out = hmcf(&["simulate", "--set", "n=3", "--set", "cfl_safety=2", "--set", "colour=red"]);
    assert_eq!(out.status.code(), Some(64));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().filter(|l| l.starts_with("config error")).count(), 3, "{stderr}");
}

#[test]
fn missing_config_file_exits_64() {
    let out = hmcf(&["verify", "--config", "/nonexistent/hmcf.conf"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn config_file_with_sections_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# circle run\n[run]\nt_end = 0.5\n{}\n\n[geometry]\ngeometry = circle\nn = 32\n",
            out_dir(dir.path())
        ),
    )
    .unwrap();
    let out = hmcf(&["simulate", "--config", conf.to_str().unwrap(), "--set", "t_end=0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last_t: f64 = traj.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last_t - 0.2).abs() < 1e-12, "{last_t}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = hmcf(&["simulate", "--set", "n=32", "--set", "t_end=0.3", "--set", &out_dir(d.path())]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["trajectory.csv", "final.mesh", "summary.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn subcommand_mismatch_is_a_config_error() {
    let out = hmcf(&["oracle", "--set", "experiment=stability"]);
    assert_eq!(out.status.code(), Some(64));
}
