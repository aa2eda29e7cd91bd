//! End-to-end tests of the `rigcal` binary: exit codes, stream separation,
//! and a closed simulate -> calibrate -> report loop.

use std::path::Path;
use std::process::{Command, Output};

use rigcal_core::io::read_rig_ground_truth;
use rigcal_core::metrics::read_error_records;

fn rigcal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigcal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Parses the `key=value` pairs of the `batch` result line.
fn parse_batch_line(line: &str) -> std::collections::HashMap<String, f64> {
    line.split_whitespace()
        .map(|pair| {
            let (key, value) = pair.split_once('=').expect("key=value");
            (key.to_string(), value.parse::<f64>().expect("numeric value"))
        })
        .collect()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = rigcal(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("simulate"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rigcal(&["batch", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--frobnicate") || stderr(&out).contains("unexpected"));
}

#[test]
fn out_of_range_forgetting_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rigcal(&["calibrate", "a", "b", "--forgetting", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("forgetting"));
}

#[test]
fn simulate_then_batch_recovers_the_rig() {
    let dir = tempfile::tempdir().unwrap();
    let sim = rigcal(
        &["simulate", "--out-dir", "sim", "--frames", "96", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(sim.status.code(), Some(0), "stderr: {}", stderr(&sim));
    for name in ["sim/cam0.txt", "sim/cam1.txt", "sim/rig.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }

    let batch = rigcal(&["batch", "sim/cam0.txt", "sim/cam1.txt"], dir.path());
    assert_eq!(batch.status.code(), Some(0), "stderr: {}", stderr(&batch));
    let line = stdout(&batch);
    let values = parse_batch_line(line.trim());

    let rig = read_rig_ground_truth(dir.path().join("sim/rig.json")).unwrap();
    let q = rig.rotation;
    // Both are on the canonical hemisphere, so components compare directly.
    assert!((values["qw"] - q.w()).abs() < 1e-6);
    assert!((values["qx"] - q.x()).abs() < 1e-6);
    assert!((values["qy"] - q.y()).abs() < 1e-6);
    assert!((values["qz"] - q.z()).abs() < 1e-6);
    assert!((values["tx"] - rig.translation[0]).abs() < 1e-6);
    assert!((values["scale"] - rig.scale).abs() < 1e-6);
}

#[test]
fn mismatched_lengths_exit_with_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    rigcal(&["simulate", "--out-dir", "a", "--frames", "8", "--seed", "1"], dir.path());
    rigcal(&["simulate", "--out-dir", "b", "--frames", "9", "--seed", "1"], dir.path());
    let out = rigcal(&["calibrate", "a/cam0.txt", "b/cam1.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lengths differ"), "stderr: {}", stderr(&out));
}

#[test]
fn calibrate_then_report_produces_error_curves() {
    let dir = tempfile::tempdir().unwrap();
    rigcal(
        &["simulate", "--out-dir", "sim", "--frames", "96", "--seed", "9"],
        dir.path(),
    );
    let calibrate = rigcal(
        &[
            "calibrate",
            "sim/cam0.txt",
            "sim/cam1.txt",
            "--warmup",
            "40",
            "--c0-scale",
            "1e8",
            "--out",
            "estimates.csv",
        ],
        dir.path(),
    );
    assert_eq!(calibrate.status.code(), Some(0), "stderr: {}", stderr(&calibrate));

    let report = rigcal(
        &["report", "--estimates", "estimates.csv", "--rig", "sim/rig.json", "--out-dir", "report"],
        dir.path(),
    );
    assert_eq!(report.status.code(), Some(0), "stderr: {}", stderr(&report));

    let errors = read_error_records(dir.path().join("report/errors.csv")).unwrap();
    assert_eq!(errors.len(), 96);
    let last = errors.last().unwrap();
    assert!(last.rot_geodesic_deg < 1e-6, "final rotation error {}", last.rot_geodesic_deg);
    assert!(last.trans_direction_deg < 1e-4);
    for name in [
        "rot_geodesic_deg",
        "rot_axis_angle_deg",
        "trans_direction_deg",
        "trans_norm_err",
        "scale_rel_err",
    ] {
        assert!(dir.path().join(format!("report/{name}.svg")).exists());
    }
}

#[test]
fn calibrate_writes_csv_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    rigcal(&["simulate", "--out-dir", "sim", "--frames", "12", "--seed", "3"], dir.path());
    let out = rigcal(&["calibrate", "sim/cam0.txt", "sim/cam1.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("frame,qw,qx,qy,qz,tx,ty,tz,scale,conditioning,trans_ratio,translation_active"));
    assert_eq!(text.lines().count(), 13); // header + 12 frames
}

#[test]
fn experiment_runs_from_a_config_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "master_seed = 3\ntrials = 2\nframes = 32\nwarmup_frames = 16\n\
         rot_noise_levels_deg = [0.5, 2.0]\ntrans_noise_levels = [0.005, 0.02]\n",
    )
    .unwrap();
    let first = rigcal(
        &["experiment", "--config", "exp.toml", "--out-dir", "out1"],
        dir.path(),
    );
    assert_eq!(first.status.code(), Some(0), "stderr: {}", stderr(&first));
    let second = rigcal(
        &["experiment", "--config", "exp.toml", "--out-dir", "out2"],
        dir.path(),
    );
    assert_eq!(second.status.code(), Some(0));

    let a = std::fs::read(dir.path().join("out1/medians.csv")).unwrap();
    let b = std::fs::read(dir.path().join("out2/medians.csv")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("out1/median_rot_geodesic_deg.svg").exists());

    let bad_config = rigcal(
        &["experiment", "--config", "missing.toml", "--out-dir", "out3"],
        dir.path(),
    );
    assert_eq!(bad_config.status.code(), Some(2));
}
