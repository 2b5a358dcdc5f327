use std::path::Path;
use std::process::{Command, Output};

use strom_cli::artifacts::{temporal_file, MANIFEST_FILE, SINGULAR_VALUES_FILE, SPATIAL_FILE};

const HEAT: &str = "\
problem.kind = heat1d
problem.nx = 24
time.dt = 0.002
time.nt = 30
samples = 0.5; 1.0; 1.5
test_params = 1.0
rom.ns = 4
rom.nt = 2
";

fn strom(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_strom"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("launch strom")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn series_column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn train_then_run_writes_artifacts_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HEAT);
    let out = dir.path().join("out");

    let train = strom(&["train"], Some(&cfg), &out);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    for f in [
        SPATIAL_FILE.to_string(),
        SINGULAR_VALUES_FILE.into(),
        MANIFEST_FILE.into(),
        temporal_file(0),
    ] {
        assert!(out.join(&f).exists(), "missing {f}");
    }
    assert!(!out.join(temporal_file(4)).exists());
    assert!(out.join("train_report.txt").exists());

    let run = strom(&["run"], Some(&cfg), &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = std::fs::read_to_string(out.join("run_report.txt")).unwrap();
    assert!(report.contains("speedup_wall_strom"));
    let csv = std::fs::read_to_string(out.join("run_series.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,fom_norm,rel_error_srom,rel_error_strom,bound1,bound2,bound3"
    );
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn full_rank_reproduces_a_training_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem.nx = 12\ntime.dt = 0.01\ntime.nt = 20\nsamples = 0.7\nrom.ns = 9\nrom.nt = 1\nrun.bounds = false\n",
    );
    let out = dir.path().join("out");
    assert!(strom(&["train"], Some(&cfg), &out).status.success());
    let run = strom(&["run", "--param", "0.7"], Some(&cfg), &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out.join("run_series.csv")).unwrap();
    for name in ["rel_error_srom", "rel_error_strom"] {
        let worst = series_column(&csv, name).into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{name} = {worst}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), "rom.ns = 4\nno_such_key = 1\n");
    assert_eq!(strom(&["train"], Some(&bad), &out).status.code(), Some(1));
    assert_eq!(strom(&["train", "--bogus"], None, &out).status.code(), Some(1));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(strom(&["train"], Some(&missing), &out).status.code(), Some(1));
}

#[test]
fn run_without_model_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    let run = strom(&["run", "--param", "1.0"], None, &out);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let ok = strom(&["verify"], None, &out);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(out.join("verify_report.txt").exists());

    let cfg = write_config(dir.path(), "verify.perturb_st = 1e-6\n");
    let bad = strom(&["verify"], Some(&cfg), &out);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("block_assembly     FAIL"));
}
