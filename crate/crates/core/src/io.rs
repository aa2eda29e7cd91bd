//! Trajectory and rig-transform file formats.
//!
//! Two pose formats are supported: 12-value `[R|T]` rows (KITTI odometry
//! layout) and `timestamp tx ty tz qx qy qz qw` rows (TUM layout, quaternion
//! scalar-last on disk, converted to scalar-first internally). Readers
//! reject malformed lines with the line number rather than skipping them,
//! and rebase the result so frame 0 is the identity.
//!
//! Poses are read as camera-to-reference transforms, the usual odometry
//! ground-truth convention; downstream code derives frame-to-frame motions
//! as `pose(t-1)^-1 * pose(t)`. A source that stores the inverse
//! (reference-to-camera) convention must have each pose inverted after
//! reading; rebasing makes the result insensitive to the reference frame
//! itself.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, RigidMotion, SimilarityTransform, Trajectory, UnitQuaternion};

/// Tolerated deviation of a TUM quaternion norm from 1 before the line is
/// rejected; smaller deviations are silently normalized.
const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseFormat {
    Kitti,
    Tum,
}

impl fmt::Display for PoseFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoseFormat::Kitti => write!(f, "kitti"),
            PoseFormat::Tum => write!(f, "tum"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: token {token}: {message}")]
    Parse { path: PathBuf, line: usize, token: usize, message: String },
    #[error("{path}:{line}: not a rotation matrix (det {det:.6}, residual {residual:.3e})")]
    NotARotation { path: PathBuf, line: usize, det: f64, residual: f64 },
    #[error("{path}:{line}: quaternion norm {norm:.6} deviates from 1 beyond tolerance")]
    NotUnitQuaternion { path: PathBuf, line: usize, norm: f64 },
    #[error("{path}: no pose data found")]
    EmptyTrajectory { path: PathBuf },
    #[error("trajectory lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{path}: invalid rig file: {message}")]
    RigParse { path: PathBuf, message: String },
}

/// A TUM-format trajectory: poses plus the per-frame timestamps from the
/// file. Timestamps are carried as metadata only; frames are associated by
/// index, never by time interpolation.
#[derive(Debug, Clone)]
pub struct TumTrajectory {
    pub trajectory: Trajectory,
    pub timestamps: Vec<f64>,
}

fn parse_token(
    path: &Path,
    line: usize,
    token: usize,
    text: &str,
) -> Result<f64, IngestError> {
    let value: f64 = text.parse().map_err(|_| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        token,
        message: format!("expected a number, found {text:?}"),
    })?;
    if !value.is_finite() {
        return Err(IngestError::Parse {
            path: path.to_path_buf(),
            line,
            token,
            message: format!("non-finite value {text:?}"),
        });
    }
    Ok(value)
}

/// Reads a KITTI-layout pose file: one pose per nonempty line as 12
/// whitespace-separated values, the row-major 3x4 matrix `[R|T]`. Rotations
/// within round-off of orthogonality are projected; anything worse is an
/// error carrying the line number. The result is rebased to frame 0.
pub fn read_kitti_poses(path: impl AsRef<Path>) -> Result<Trajectory, IngestError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    let mut poses = Vec::new();
    for (index, raw_line) in content.lines().enumerate() {
        let line = index + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw_line.split_whitespace().collect();
        if tokens.len() != 12 {
            return Err(IngestError::Parse {
                path: path.to_path_buf(),
                line,
                token: tokens.len().min(12),
                message: format!("expected 12 values per pose line, found {}", tokens.len()),
            });
        }
        let mut values = [0.0f64; 12];
        for (i, text) in tokens.iter().enumerate() {
            values[i] = parse_token(path, line, i + 1, text)?;
        }
        let rotation_matrix = Matrix3::new(
            values[0], values[1], values[2],
            values[4], values[5], values[6],
            values[8], values[9], values[10],
        );
        let rotation = UnitQuaternion::from_matrix(&rotation_matrix).map_err(|err| match err {
            GeometryError::NotARotation { det, residual } => IngestError::NotARotation {
                path: path.to_path_buf(),
                line,
                det,
                residual,
            },
            GeometryError::InvalidScale(_) => unreachable!("from_matrix never reports scale"),
        })?;
        let translation = Vector3::new(values[3], values[7], values[11]);
        poses.push(RigidMotion::new(rotation, translation));
    }
    if poses.is_empty() {
        return Err(IngestError::EmptyTrajectory { path: path.to_path_buf() });
    }
    Ok(rebase_to_first(&Trajectory::new(poses)))
}

/// Writes a trajectory in the KITTI layout with 17 significant digits, which
/// round-trips `f64` exactly.
pub fn write_kitti_poses(path: impl AsRef<Path>, trajectory: &Trajectory) -> Result<(), IngestError> {
    let mut out = String::new();
    for pose in trajectory.iter() {
        let r = pose.rotation.to_matrix();
        let t = pose.translation;
        let row = [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0],
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1],
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2],
        ];
        let formatted: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&formatted.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a TUM-layout trajectory: `timestamp tx ty tz qx qy qz qw` per line,
/// `#` comment lines skipped. Quaternions are normalized when within
/// tolerance of unit norm and rejected otherwise. The result is rebased to
/// frame 0; timestamps are preserved untouched.
pub fn read_tum_trajectory(path: impl AsRef<Path>) -> Result<TumTrajectory, IngestError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    let mut poses = Vec::new();
    let mut timestamps = Vec::new();
    for (index, raw_line) in content.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(IngestError::Parse {
                path: path.to_path_buf(),
                line,
                token: tokens.len().min(8),
                message: format!("expected 8 values per pose line, found {}", tokens.len()),
            });
        }
        let mut values = [0.0f64; 8];
        for (i, text) in tokens.iter().enumerate() {
            values[i] = parse_token(path, line, i + 1, text)?;
        }
        let (qx, qy, qz, qw) = (values[4], values[5], values[6], values[7]);
        let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(IngestError::NotUnitQuaternion { path: path.to_path_buf(), line, norm });
        }
        timestamps.push(values[0]);
        poses.push(RigidMotion::new(
            UnitQuaternion::new(qw, qx, qy, qz),
            Vector3::new(values[1], values[2], values[3]),
        ));
    }
    if poses.is_empty() {
        return Err(IngestError::EmptyTrajectory { path: path.to_path_buf() });
    }
    Ok(TumTrajectory { trajectory: rebase_to_first(&Trajectory::new(poses)), timestamps })
}

/// Writes a trajectory in the TUM layout. Without explicit timestamps the
/// frame index is used.
pub fn write_tum_trajectory(
    path: impl AsRef<Path>,
    trajectory: &Trajectory,
    timestamps: Option<&[f64]>,
) -> Result<(), IngestError> {
    if let Some(stamps) = timestamps {
        if stamps.len() != trajectory.len() {
            return Err(IngestError::LengthMismatch {
                left: stamps.len(),
                right: trajectory.len(),
            });
        }
    }
    let mut out = String::new();
    for (frame, pose) in trajectory.iter().enumerate() {
        let stamp = timestamps.map_or(frame as f64, |s| s[frame]);
        let q = pose.rotation;
        let t = pose.translation;
        out.push_str(&format!(
            "{stamp} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}\n",
            t[0], t[1], t[2], q.x(), q.y(), q.z(), q.w()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a pose file in the given format, discarding format-specific
/// metadata.
pub fn read_trajectory(path: impl AsRef<Path>, format: PoseFormat) -> Result<Trajectory, IngestError> {
    match format {
        PoseFormat::Kitti => read_kitti_poses(path),
        PoseFormat::Tum => Ok(read_tum_trajectory(path)?.trajectory),
    }
}

/// Writes a pose file in the given format.
pub fn write_trajectory(
    path: impl AsRef<Path>,
    trajectory: &Trajectory,
    format: PoseFormat,
) -> Result<(), IngestError> {
    match format {
        PoseFormat::Kitti => write_kitti_poses(path, trajectory),
        PoseFormat::Tum => write_tum_trajectory(path, trajectory, None),
    }
}

#[derive(Serialize, Deserialize)]
struct RigSidecar {
    rotation_wxyz: [f64; 4],
    translation: [f64; 3],
    scale: f64,
}

/// Writes the rig transform as a JSON sidecar with the quaternion in
/// `(w, x, y, z)` order.
pub fn write_rig_ground_truth(
    path: impl AsRef<Path>,
    rig: &SimilarityTransform,
) -> Result<(), IngestError> {
    let q = rig.rotation;
    let sidecar = RigSidecar {
        rotation_wxyz: [q.w(), q.x(), q.y(), q.z()],
        translation: [rig.translation[0], rig.translation[1], rig.translation[2]],
        scale: rig.scale,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("plain struct serializes");
    fs::write(path, json)?;
    Ok(())
}

pub fn read_rig_ground_truth(path: impl AsRef<Path>) -> Result<SimilarityTransform, IngestError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    let sidecar: RigSidecar = serde_json::from_str(&content).map_err(|err| {
        IngestError::RigParse { path: path.to_path_buf(), message: err.to_string() }
    })?;
    let [w, x, y, z] = sidecar.rotation_wxyz;
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(IngestError::RigParse {
            path: path.to_path_buf(),
            message: format!("rotation_wxyz has invalid norm {norm}"),
        });
    }
    let rotation = UnitQuaternion::new(w, x, y, z);
    let translation = Vector3::new(sidecar.translation[0], sidecar.translation[1], sidecar.translation[2]);
    SimilarityTransform::new(rotation, translation, sidecar.scale).map_err(|err| {
        IngestError::RigParse { path: path.to_path_buf(), message: err.to_string() }
    })
}

/// Re-expresses every pose relative to the first: `pose(0)^-1 * pose(t)`.
/// Frame-to-frame motions are unchanged by this.
pub fn rebase_to_first(trajectory: &Trajectory) -> Trajectory {
    let inverse_first = trajectory.first().invert();
    Trajectory::new(trajectory.iter().map(|pose| inverse_first.compose(pose)).collect())
}

/// Checks that two trajectories cover the same number of frames, which the
/// calibration entry points require.
pub fn require_same_length(a: &Trajectory, b: &Trajectory) -> Result<(), IngestError> {
    if a.len() != b.len() {
        return Err(IngestError::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}
