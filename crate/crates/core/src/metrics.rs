//! Per-frame error metrics against a known rig, and the CSV record types
//! the command-line tools exchange.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{SimilarityTransform, UnitQuaternion};
use crate::online::CalibrationEstimate;

/// Rotations smaller than this angle (radians) have no meaningful axis; the
/// axis error metric reports 0 for them and the geodesic error carries the
/// information instead.
const AXIS_GATE_RAD: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: row {row}: {message}")]
    InvalidRecord { path: String, row: usize, message: String },
}

/// One row of an error report. `conditioning` repeats the estimate's
/// rotation conditioning ratio so degraded frames can be filtered later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameErrorRecord {
    pub frame: usize,
    pub rot_geodesic_deg: f64,
    pub rot_axis_angle_deg: f64,
    pub trans_direction_deg: f64,
    pub trans_norm_err: f64,
    pub scale_rel_err: f64,
    pub conditioning: f64,
    pub translation_active: bool,
}

/// Angle in degrees between the rotation axes of two rotations, gated to 0
/// when either rotation is numerically the identity.
pub fn axis_angle_between_deg(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    if a.angle_rad() < AXIS_GATE_RAD || b.angle_rad() < AXIS_GATE_RAD {
        return 0.0;
    }
    match (a.axis(), b.axis()) {
        (Some(axis_a), Some(axis_b)) => direction_angle_deg(&axis_a, &axis_b),
        _ => 0.0,
    }
}

/// Angle in degrees between two directions, via `atan2` of cross and dot so
/// near-parallel directions resolve to the last ulp. A zero vector on
/// exactly one side is maximally wrong (180); zero on both sides is a
/// perfect match.
pub fn direction_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    match (na > 0.0, nb > 0.0) {
        (true, true) => a.cross(b).norm().atan2(a.dot(b)).to_degrees(),
        (false, false) => 0.0,
        _ => 180.0,
    }
}

/// Compares one estimate against the true rig transform.
pub fn compute_frame_errors(
    estimate: &CalibrationEstimate,
    truth: &SimilarityTransform,
) -> FrameErrorRecord {
    let est = &estimate.transform;
    FrameErrorRecord {
        frame: estimate.frame,
        rot_geodesic_deg: est.rotation.geodesic_angle_deg(&truth.rotation),
        rot_axis_angle_deg: axis_angle_between_deg(&est.rotation, &truth.rotation),
        trans_direction_deg: direction_angle_deg(&est.translation, &truth.translation),
        trans_norm_err: (est.translation - truth.translation).norm(),
        scale_rel_err: (est.scale - truth.scale).abs() / truth.scale,
        conditioning: estimate.rotation_conditioning,
        translation_active: estimate.translation_active,
    }
}

/// One row of a per-frame estimate dump, the `calibrate` output format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub frame: usize,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub scale: f64,
    pub conditioning: f64,
    pub trans_ratio: f64,
    pub translation_active: bool,
}

impl EstimateRecord {
    pub fn from_estimate(estimate: &CalibrationEstimate) -> Self {
        let t = &estimate.transform;
        Self {
            frame: estimate.frame,
            qw: t.rotation.w(),
            qx: t.rotation.x(),
            qy: t.rotation.y(),
            qz: t.rotation.z(),
            tx: t.translation[0],
            ty: t.translation[1],
            tz: t.translation[2],
            scale: t.scale,
            conditioning: estimate.rotation_conditioning,
            trans_ratio: estimate.translation_magnitude_ratio,
            translation_active: estimate.translation_active,
        }
    }

    /// Reassembles the estimate for error reporting.
    pub fn to_estimate(&self) -> CalibrationEstimate {
        CalibrationEstimate {
            transform: SimilarityTransform {
                rotation: UnitQuaternion::new(self.qw, self.qx, self.qy, self.qz),
                translation: Vector3::new(self.tx, self.ty, self.tz),
                scale: self.scale,
            },
            rotation_conditioning: self.conditioning,
            rotation_ill_conditioned: false,
            translation_active: self.translation_active,
            translation_magnitude_ratio: self.trans_ratio,
            frame: self.frame,
        }
    }
}

pub fn write_error_records(
    path: impl AsRef<Path>,
    records: &[FrameErrorRecord],
) -> Result<(), MetricsError> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_error_records(path: impl AsRef<Path>) -> Result<Vec<FrameErrorRecord>, MetricsError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut records = Vec::new();
    let mut last_frame = 0usize;
    for (row, result) in reader.deserialize::<FrameErrorRecord>().enumerate() {
        let record = result?;
        if !records.is_empty() && record.frame <= last_frame {
            return Err(MetricsError::InvalidRecord {
                path: path.display().to_string(),
                row: row + 1,
                message: format!("frames not strictly increasing at frame {}", record.frame),
            });
        }
        last_frame = record.frame;
        records.push(record);
    }
    Ok(records)
}

pub fn write_estimate_records(
    path: impl AsRef<Path>,
    records: &[EstimateRecord],
) -> Result<(), MetricsError> {
    write_estimate_records_to(BufWriter::new(File::create(path)?), records)
}

pub fn write_estimate_records_to(
    writer: impl std::io::Write,
    records: &[EstimateRecord],
) -> Result<(), MetricsError> {
    let mut writer = csv::Writer::from_writer(writer);
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_estimate_records(path: impl AsRef<Path>) -> Result<Vec<EstimateRecord>, MetricsError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut records = Vec::new();
    for (row, result) in reader.deserialize::<EstimateRecord>().enumerate() {
        let record: EstimateRecord = result?;
        let norm = (record.qw * record.qw
            + record.qx * record.qx
            + record.qy * record.qy
            + record.qz * record.qz)
            .sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(MetricsError::InvalidRecord {
                path: path.display().to_string(),
                row: row + 1,
                message: format!("rotation quaternion has invalid norm {norm}"),
            });
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::random_rig;
    use std::f64::consts::FRAC_PI_4;

    fn estimate_from(transform: SimilarityTransform, frame: usize) -> CalibrationEstimate {
        CalibrationEstimate {
            transform,
            rotation_conditioning: 42.0,
            rotation_ill_conditioned: false,
            translation_active: true,
            translation_magnitude_ratio: 1.0,
            frame,
        }
    }

    #[test]
    fn perfect_estimate_has_zero_errors() {
        let rig = random_rig(7);
        let record = compute_frame_errors(&estimate_from(rig, 3), &rig);
        assert_eq!(record.frame, 3);
        assert_eq!(record.rot_geodesic_deg, 0.0);
        assert_eq!(record.rot_axis_angle_deg, 0.0);
        assert!(record.trans_direction_deg < 1e-6);
        assert_eq!(record.trans_norm_err, 0.0);
        assert_eq!(record.scale_rel_err, 0.0);
    }

    #[test]
    fn same_axis_offset_rotation_has_zero_axis_error() {
        let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
        let truth = SimilarityTransform::new(
            UnitQuaternion::from_axis_angle(&axis, FRAC_PI_4),
            Vector3::x(),
            1.0,
        )
        .unwrap();
        let mut est = truth;
        est.rotation = UnitQuaternion::from_axis_angle(&axis, FRAC_PI_4 + 5.0f64.to_radians());
        let record = compute_frame_errors(&estimate_from(est, 1), &truth);
        assert!(record.rot_axis_angle_deg < 1e-9);
        assert!((record.rot_geodesic_deg - 5.0).abs() < 1e-9);
    }

    #[test]
    fn near_identity_rotation_gates_the_axis_metric() {
        let truth = SimilarityTransform::identity();
        let mut est = truth;
        est.rotation = UnitQuaternion::from_axis_angle(&Vector3::z(), 1e-10);
        let record = compute_frame_errors(&estimate_from(est, 1), &truth);
        assert_eq!(record.rot_axis_angle_deg, 0.0);
    }

    #[test]
    fn antipodal_translation_reads_180_degrees() {
        let rig = random_rig(9);
        let mut est = rig;
        est.translation = -rig.translation;
        let record = compute_frame_errors(&estimate_from(est, 1), &rig);
        assert!((record.trans_direction_deg - 180.0).abs() < 1e-9);
    }

    #[test]
    fn zero_estimate_against_nonzero_truth_is_the_sentinel() {
        let rig = random_rig(10);
        let est = SimilarityTransform { rotation: rig.rotation, translation: Vector3::zeros(), scale: 0.0 };
        let record = compute_frame_errors(&estimate_from(est, 1), &rig);
        assert_eq!(record.trans_direction_deg, 180.0);
        assert_eq!(record.scale_rel_err, 1.0);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let rig = random_rig(11);
        let records: Vec<FrameErrorRecord> = (1..=5)
            .map(|frame| {
                let mut est = estimate_from(rig, frame);
                est.rotation_conditioning = if frame == 1 { f64::INFINITY } else { 42.0 };
                compute_frame_errors(&est, &rig)
            })
            .collect();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_error_records(file.path(), &records).unwrap();
        let back = read_error_records(file.path()).unwrap();
        assert_eq!(back.len(), records.len());
        assert!(back[0].conditioning.is_infinite());
        assert_eq!(back[4].frame, 5);

        let header = std::fs::read_to_string(file.path()).unwrap();
        assert!(header.starts_with(
            "frame,rot_geodesic_deg,rot_axis_angle_deg,trans_direction_deg,\
             trans_norm_err,scale_rel_err,conditioning,translation_active"
        ));
    }

    #[test]
    fn estimate_records_round_trip() {
        let rig = random_rig(12);
        let estimate = estimate_from(rig, 4);
        let record = EstimateRecord::from_estimate(&estimate);
        let file = tempfile::NamedTempFile::new().unwrap();
        write_estimate_records(file.path(), &[record]).unwrap();
        let back = read_estimate_records(file.path()).unwrap();
        assert_eq!(back.len(), 1);
        let rebuilt = back[0].to_estimate();
        assert_eq!(rebuilt.frame, 4);
        assert_eq!(rebuilt.transform.rotation.as_vector(), rig.rotation.as_vector());
        assert_eq!(rebuilt.transform.translation, rig.translation);
    }

    #[test]
    fn zero_quaternion_rows_are_rejected() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            file.path(),
            "frame,qw,qx,qy,qz,tx,ty,tz,scale,conditioning,trans_ratio,translation_active\n\
             1,0,0,0,0,0,0,0,0,1,1,false\n",
        )
        .unwrap();
        assert!(matches!(
            read_estimate_records(file.path()),
            Err(MetricsError::InvalidRecord { row: 1, .. })
        ));
    }

    #[test]
    fn out_of_order_frames_are_rejected() {
        let rig = random_rig(13);
        let records = vec![
            compute_frame_errors(&estimate_from(rig, 2), &rig),
            compute_frame_errors(&estimate_from(rig, 2), &rig),
        ];
        let file = tempfile::NamedTempFile::new().unwrap();
        write_error_records(file.path(), &records).unwrap();
        assert!(matches!(
            read_error_records(file.path()),
            Err(MetricsError::InvalidRecord { .. })
        ));
    }
}
