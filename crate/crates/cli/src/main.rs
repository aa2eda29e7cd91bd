//! `rigcal`: calibrate the fixed transform between two rigidly mounted,
//! non-overlapping cameras from their synchronized pose streams.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 on a data or numerical
//! error. Diagnostics go to stderr; results go to files or stdout.

use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use rigcal_core::experiment::{run_experiment, ExperimentConfig};
use rigcal_core::io::{
    read_rig_ground_truth, read_trajectory, require_same_length, write_rig_ground_truth,
    write_trajectory, PoseFormat,
};
use rigcal_core::metrics::{
    compute_frame_errors, read_estimate_records, write_error_records, write_estimate_records,
    write_estimate_records_to, EstimateRecord, FrameErrorRecord,
};
use rigcal_core::online::{CalibratorConfig, OnlineCalibrator};
use rigcal_core::plot::{render_line_chart, Series};
use rigcal_core::sim::{
    add_noise, derive_slave_trajectory, generate_master_trajectory, random_rig, NoiseModel,
    SimConfig,
};
use rigcal_core::{calibrate_batch, Trajectory};

#[derive(Parser)]
#[command(
    name = "rigcal",
    version,
    about = "Online non-overlapping camera rig calibration from pose streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Kitti,
    Tum,
}

impl From<Format> for PoseFormat {
    fn from(format: Format) -> Self {
        match format {
            Format::Kitti => PoseFormat::Kitti,
            Format::Tum => PoseFormat::Tum,
        }
    }
}

fn parse_forgetting(text: &str) -> Result<f64, String> {
    let value: f64 = text.parse().map_err(|_| format!("not a number: {text}"))?;
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(format!("forgetting factor must lie in (0, 1], got {value}"))
    }
}

fn parse_positive(text: &str) -> Result<f64, String> {
    let value: f64 = text.parse().map_err(|_| format!("not a number: {text}"))?;
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(format!("value must be positive and finite, got {value}"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random rig and a synthetic pose-file pair plus the
    /// ground-truth rig sidecar.
    Simulate {
        /// Directory for cam0/cam1 pose files and rig.json.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 128)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.92)]
        damping: f64,
        /// Twist excitation std, degrees per frame.
        #[arg(long, default_value_t = 1.5)]
        process_noise_rot: f64,
        /// Twist excitation std, scene units per frame.
        #[arg(long, default_value_t = 0.02)]
        process_noise_trans: f64,
        /// Pose noise std in degrees (0 keeps trajectories exact).
        #[arg(long, default_value_t = 0.0)]
        rot_noise: f64,
        /// Pose noise std in scene units.
        #[arg(long, default_value_t = 0.0)]
        trans_noise: f64,
        #[arg(long, value_enum, default_value_t = Format::Kitti)]
        format: Format,
    },
    /// Run the online estimator over two pose files and dump per-frame
    /// estimates as CSV (stdout unless --out is given).
    Calibrate {
        cam0: PathBuf,
        cam1: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Kitti)]
        format: Format,
        #[arg(long, default_value_t = 1.0, value_parser = parse_forgetting)]
        forgetting: f64,
        #[arg(long, default_value_t = 60)]
        warmup: usize,
        #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
        c0_scale: f64,
        #[arg(long, default_value_t = 10.0, value_parser = parse_positive)]
        conditioning_threshold: f64,
        /// Build constraints from frame-to-frame motions instead of
        /// accumulated poses (comparison mode; poorly conditioned).
        #[arg(long)]
        use_relative_constraints: bool,
        /// Replay warm-up frames into the translation recursion once it
        /// activates.
        #[arg(long)]
        buffer_warmup: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-shot batch calibration of two pose files; prints a single
    /// result line.
    Batch {
        cam0: PathBuf,
        cam1: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Kitti)]
        format: Format,
    },
    /// Compare per-frame estimates against a rig sidecar: error CSV plus
    /// one SVG chart per metric.
    Report {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the full noise-sweep experiment described by a TOML config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return 0;
            }
            eprint!("{err}");
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn execute(command: Command) -> Result<(), Box<dyn Error>> {
    match command {
        Command::Simulate {
            out_dir,
            frames,
            seed,
            damping,
            process_noise_rot,
            process_noise_trans,
            rot_noise,
            trans_noise,
            format,
        } => {
            fs::create_dir_all(&out_dir)?;
            let rig = random_rig(seed);
            let master = generate_master_trajectory(&SimConfig {
                frames,
                damping,
                process_noise_rot_deg: process_noise_rot,
                process_noise_trans,
                seed,
                ..SimConfig::default()
            });
            let slave = derive_slave_trajectory(&master, &rig);
            let (cam0, cam1) = if rot_noise > 0.0 || trans_noise > 0.0 {
                (
                    add_noise(&master, &NoiseModel::new(rot_noise, trans_noise, seed.wrapping_add(1))),
                    add_noise(&slave, &NoiseModel::new(rot_noise, trans_noise, seed.wrapping_add(2))),
                )
            } else {
                (master, slave)
            };
            let format: PoseFormat = format.into();
            let cam0_path = out_dir.join("cam0.txt");
            let cam1_path = out_dir.join("cam1.txt");
            let rig_path = out_dir.join("rig.json");
            write_trajectory(&cam0_path, &cam0, format)?;
            write_trajectory(&cam1_path, &cam1, format)?;
            write_rig_ground_truth(&rig_path, &rig)?;
            eprintln!(
                "wrote {} frames to {} and {}, rig to {}",
                frames,
                cam0_path.display(),
                cam1_path.display(),
                rig_path.display()
            );
            Ok(())
        }
        Command::Calibrate {
            cam0,
            cam1,
            format,
            forgetting,
            warmup,
            c0_scale,
            conditioning_threshold,
            use_relative_constraints,
            buffer_warmup,
            out,
        } => {
            let (traj0, traj1) = load_pair(&cam0, &cam1, format.into())?;
            let config = CalibratorConfig {
                forgetting,
                warmup_frames: warmup,
                c0_scale,
                conditioning_threshold,
                use_relative_constraints,
                buffer_warmup,
            };
            let mut calibrator = OnlineCalibrator::new(config)?;
            let mut records = Vec::with_capacity(traj0.frame_count());
            for (m0, m1) in traj0.relative_motions().iter().zip(traj1.relative_motions().iter()) {
                let estimate = calibrator.step(m0, m1)?;
                records.push(EstimateRecord::from_estimate(&estimate));
            }
            match out {
                Some(path) => write_estimate_records(path, &records)?,
                None => write_estimate_records_to(std::io::stdout().lock(), &records)?,
            }
            Ok(())
        }
        Command::Batch { cam0, cam1, format } => {
            let (traj0, traj1) = load_pair(&cam0, &cam1, format.into())?;
            let transform = calibrate_batch(&traj0, &traj1)?;
            let q = transform.rotation;
            let t = transform.translation;
            println!(
                "qw={} qx={} qy={} qz={} tx={} ty={} tz={} scale={}",
                q.w(),
                q.x(),
                q.y(),
                q.z(),
                t[0],
                t[1],
                t[2],
                transform.scale
            );
            Ok(())
        }
        Command::Report { estimates, rig, out_dir } => {
            let rig = read_rig_ground_truth(&rig)?;
            let records = read_estimate_records(&estimates)?;
            if records.is_empty() {
                return Err("estimates file contains no rows".into());
            }
            let errors: Vec<FrameErrorRecord> = records
                .iter()
                .map(|record| compute_frame_errors(&record.to_estimate(), &rig))
                .collect();
            fs::create_dir_all(&out_dir)?;
            write_error_records(out_dir.join("errors.csv"), &errors)?;

            type ErrorAccessor = fn(&FrameErrorRecord) -> f64;
            let metrics: [(&str, ErrorAccessor); 5] = [
                ("rot_geodesic_deg", |r| r.rot_geodesic_deg),
                ("rot_axis_angle_deg", |r| r.rot_axis_angle_deg),
                ("trans_direction_deg", |r| r.trans_direction_deg),
                ("trans_norm_err", |r| r.trans_norm_err),
                ("scale_rel_err", |r| r.scale_rel_err),
            ];
            for (name, extract) in metrics {
                let series = Series {
                    label: name.to_string(),
                    points: errors.iter().map(|r| (r.frame as f64, extract(r))).collect(),
                };
                let svg = render_line_chart(
                    &format!("{name} vs iteration"),
                    "iteration",
                    name,
                    &[series],
                    true,
                );
                fs::write(out_dir.join(format!("{name}.svg")), svg)?;
            }
            eprintln!("wrote error report for {} frames to {}", errors.len(), out_dir.display());
            Ok(())
        }
        Command::Experiment { config, out_dir } => {
            let config = ExperimentConfig::from_file(&config)?;
            let report = run_experiment(&config, &out_dir)?;
            for (li, level) in report.levels.iter().enumerate() {
                eprintln!(
                    "level {li} (rot {} deg, trans {}): final median rotation {:.4} deg, \
                     translation direction {:.4} deg",
                    level.rot_noise_deg,
                    level.trans_noise,
                    level.median_rot_geodesic_deg.last().unwrap(),
                    level.median_trans_direction_deg.last().unwrap(),
                );
            }
            eprintln!("experiment outputs in {}", out_dir.display());
            Ok(())
        }
    }
}

fn load_pair(
    cam0: &PathBuf,
    cam1: &PathBuf,
    format: PoseFormat,
) -> Result<(Trajectory, Trajectory), Box<dyn Error>> {
    let traj0 = read_trajectory(cam0, format)?;
    let traj1 = read_trajectory(cam1, format)?;
    require_same_length(&traj0, &traj1)?;
    Ok((traj0, traj1))
}
