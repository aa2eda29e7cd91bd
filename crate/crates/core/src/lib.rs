//! Online calibration of non-overlapping camera rigs.
//!
//! Two rigidly mounted cameras that never share a field of view can still be
//! calibrated from their synchronized ego-motion: the fixed inter-camera
//! rotation, translation and scale are observable from the two pose streams
//! alone. This crate provides
//!
//! - the per-frame constraint algebra ([`constraints`]),
//! - an exact batch solver used both standalone and as a reference
//!   ([`batch`]),
//! - the online estimator that updates the rotation through an incremental
//!   SVD and the translation/scale through recursive least squares at every
//!   frame ([`online`]),
//! - a trajectory simulator with a consistent forward model ([`sim`]),
//! - pose-file ingestion for common odometry formats ([`io`]),
//! - and error metrics plus a reproducible experiment harness
//!   ([`metrics`], [`experiment`]).

pub mod batch;
pub mod constraints;
pub mod experiment;
pub mod geometry;
pub mod incremental_svd;
pub mod io;
pub mod metrics;
pub mod online;
pub mod plot;
pub mod rls;
pub mod sim;

pub use batch::{calibrate_batch, solve_rotation_batch, solve_translation_batch};
pub use geometry::{RigidMotion, SimilarityTransform, Trajectory, UnitQuaternion};
pub use online::{CalibrationEstimate, CalibratorConfig, OnlineCalibrator};
