use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use hj_envelope::formats::{read_checkpoint, read_measure_atoms};

const SMALL: &str = r#"version = 1

[model]
nonlinearity = "sk"

[initial]
profile = "logcosh"

[grid]
low = -1.0
high = 3.0
points = 41
horizon = 0.6

[ladder]
levels = [0]
eta = [0.1]
eps = [0.1]

[[probe]]
t = 0.2
breakpoints = [0.0]
values = [1.0]
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hj-envelope"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bad_value_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        SMALL.replace("eps = [0.1]", "eps = [-0.1]"),
    )
    .unwrap();
    let o = run(&["solve", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:18:"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        SMALL.replace("points = 41", "points = 41\nspeed = 3"),
    )
    .unwrap();
    let o = run(&["solve", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c.toml:13:"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["adjoint"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["solve", "--config", "nope.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn solve_writes_a_readable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = run(&["solve", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let f = read_checkpoint(&mut BufReader::new(
        fs::File::open(out.join("field_j0.bin")).unwrap(),
    ))
    .unwrap();
    assert_eq!(f.grid().points(), 41);
    assert_eq!(f.slices().len(), f.grid().steps() + 1);
    assert_eq!(f.eps(), 0.1);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["command"], "solve");
}

#[test]
fn ball_below_grid_resolution_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        SMALL.replace("eps = [0.1]", "eps = [0.1]\nr = [0.15]"),
    )
    .unwrap();
    let o = run(&["adjoint", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c.toml:19:"), "{}", stderr(&o));
}

#[test]
fn adjoint_measures_have_unit_weight() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = run(
        &["adjoint", "--config", "c.toml", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let atoms =
        read_measure_atoms(fs::File::open(dir.path().join("out/measure_j0_c0_p0.csv")).unwrap())
            .unwrap();
    let total: f64 = atoms.iter().map(|(w, _)| w).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn selftest_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["selftest", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/selftest.csv").exists());
}
