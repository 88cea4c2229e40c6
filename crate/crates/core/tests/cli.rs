use std::path::Path;
use std::process::{Command, Output};

fn octcal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octcal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn octcal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"
seed = 5
noise_sigma = 4.0
mode = "marker"

[geometry]
extent_x_mm = 3.01
extent_y_mm = 3.10
extent_z_mm = 2.60
n_x = 256
n_y = 64
n_z = 256

[trajectory]
pattern = "traj1"
step_um = 40.0
steps_per_leg = 2
"#;

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = octcal(dir.path(), &["--help"]);
    assert!(o.status.success());
    for cmd in ["synth", "calibrate-galvo", "detect-tip", "run", "noise-sweep", "stats"] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
}

#[test]
fn unknown_method_is_rejected_before_processing() {
    let dir = tempfile::tempdir().unwrap();
    let o = octcal(dir.path(), &["run", "--dataset", "missing", "--method", "LSQ"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("LSQ"), "{}", stderr(&o));
    assert!(!dir.path().join("missing").exists());
}

#[test]
fn missing_input_fails_with_cause() {
    let dir = tempfile::tempdir().unwrap();
    let o = octcal(dir.path(), &["detect-tip", "--volume", "nope.hdr", "--out", "tip.csv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(!dir.path().join("tip.csv").exists());
}

#[test]
fn stats_summarizes_an_error_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "index,e_um\n0,1.0\n1,2.0\n2,3.0\n3,10.0\nmean,4.0\n").unwrap();
    let o = octcal(dir.path(), &["stats", "--errors", "e.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("n=4\nmean_um=4.0000\nmedian_um=2.5000\n"), "{s}");
}

#[test]
fn synth_then_run_marker_dataset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), TINY).unwrap();
    let o = octcal(dir.path(), &["synth", "--config", "exp.toml", "--out", "ds"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ds = dir.path().join("ds");
    for f in ["poses.csv", "galvo.txt", "ground_truth.toml", "config.toml", "volumes/pose_006.hdr"] {
        assert!(ds.join(f).exists(), "{f}");
    }
    assert!(!ds.join("volumes/pose_007.hdr").exists());

    let o = octcal(dir.path(), &["run", "--dataset", "ds", "--mode", "marker", "--method", "SVDT"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = ds.join("run");
    let errors = std::fs::read_to_string(run.join("errors.csv")).unwrap();
    assert!(errors.starts_with("index,e_um\n"));
    assert_eq!(errors.lines().count(), 1 + 7 + 1);
    let mean: f64 = errors
        .lines()
        .last()
        .unwrap()
        .strip_prefix("mean,")
        .unwrap()
        .parse()
        .unwrap();
    assert!(mean < 10.0, "{mean}");
    assert_eq!(std::fs::read_to_string(run.join("transform.txt")).unwrap().lines().count(), 3);
    assert!(stderr(&o).contains("s/volume"));

    let o = octcal(
        dir.path(),
        &["detect-tip", "--volume", "ds/volumes/pose_000.hdr", "--mode", "marker", "--out", "tip.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let tip = std::fs::read_to_string(dir.path().join("tip.csv")).unwrap();
    assert!(tip.starts_with("x_mm,y_mm,z_mm,raw_x_mm,raw_y_mm,raw_z_mm\n"));
}

#[test]
fn detection_without_foreground_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), TINY).unwrap();
    assert!(octcal(dir.path(), &["synth", "--config", "exp.toml", "--out", "ds"]).status.success());
    // An unreachable threshold leaves nothing segmented.
    let o = octcal(
        dir.path(),
        &["detect-tip", "--volume", "ds/volumes/pose_000.hdr", "--mode", "needle", "--out", "tip.csv", "--k", "250"],
    );
    assert!(!o.status.success());
}
