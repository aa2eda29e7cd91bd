//! Per-frame online estimator: each step ingests one ego-motion pair,
//! updates the rotation subspace, then (after warm-up) feeds the
//! translation/scale recursion with the current rotation substituted into
//! the constraint block. Step cost is constant, so the estimator satisfies
//! an online real-time contract.

use nalgebra::Vector3;

use crate::constraints::{build_a, build_a_from_vectors, build_b, SignContinuousLift};
use crate::geometry::{RigidMotion, SimilarityTransform};
use crate::incremental_svd::SvdState;
use crate::rls::{RlsError, RlsObservation, RlsState};

#[derive(Debug, thiserror::Error)]
pub enum OnlineError {
    #[error("invalid calibrator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rls(#[from] RlsError),
    #[error("no frames processed yet")]
    NoData,
}

/// Estimator configuration.
///
/// Translation estimation starts once the frame counter reaches
/// `warmup_frames`; early rotation estimates are poor and would otherwise
/// bias the translation recursion permanently under unit forgetting.
#[derive(Debug, Clone)]
pub struct CalibratorConfig {
    /// Exponential forgetting factor in (0, 1]; 1 keeps all history.
    pub forgetting: f64,
    /// First frame at which translation observations are absorbed.
    pub warmup_frames: usize,
    /// Scale of the initial translation/scale covariance; larger values
    /// weaken the pull of the zero prior on early estimates.
    pub c0_scale: f64,
    /// Conditioning ratio below which the rotation estimate is flagged.
    pub conditioning_threshold: f64,
    /// Build constraints from raw frame-to-frame motions instead of the
    /// accumulated poses. Kept for comparison experiments; per-frame
    /// rotations are small, which leaves the rotation problem poorly
    /// conditioned.
    pub use_relative_constraints: bool,
    /// Record warm-up frames and replay them into the translation recursion
    /// once it activates, using the rotation estimate of that moment. The
    /// exponential weights treat replayed frames as contemporaneous.
    pub buffer_warmup: bool,
}

impl Default for CalibratorConfig {
    fn default() -> Self {
        Self {
            forgetting: 1.0,
            warmup_frames: 60,
            c0_scale: 1.0,
            conditioning_threshold: 10.0,
            use_relative_constraints: false,
            buffer_warmup: false,
        }
    }
}

/// Snapshot of the calibration after one step.
///
/// Before translation activates, `transform.translation` is zero and
/// `transform.scale` is the 0 sentinel meaning "not yet estimated".
#[derive(Debug, Clone)]
pub struct CalibrationEstimate {
    pub transform: SimilarityTransform,
    /// Ratio of the second-smallest to smallest singular value of the
    /// rotation constraint stack.
    pub rotation_conditioning: f64,
    /// True when `rotation_conditioning` fell below the configured
    /// threshold: the rig motion has not excited enough rotation axes.
    pub rotation_ill_conditioned: bool,
    pub translation_active: bool,
    /// Per-frame ratio of the slave to master translation magnitudes. Scale
    /// drift in an upstream ego-motion source shows up as variation here;
    /// NaN when both magnitudes vanish.
    pub translation_magnitude_ratio: f64,
    pub frame: usize,
}

/// Deferred translation observation recorded during warm-up.
#[derive(Debug, Clone)]
struct BufferedFrame {
    rotation0: nalgebra::Matrix3<f64>,
    translation0: Vector3<f64>,
    translation1: Vector3<f64>,
}

/// The online estimator. One instance per camera pair; stepping requires
/// exclusive access and instances are independent across threads.
#[derive(Debug, Clone)]
pub struct OnlineCalibrator {
    config: CalibratorConfig,
    svd: Option<SvdState>,
    rls: RlsState,
    abs_pose0: RigidMotion,
    abs_pose1: RigidMotion,
    lift0: SignContinuousLift,
    lift1: SignContinuousLift,
    frame: usize,
    buffer: Vec<BufferedFrame>,
    last: Option<CalibrationEstimate>,
}

impl OnlineCalibrator {
    pub fn new(config: CalibratorConfig) -> Result<Self, OnlineError> {
        if !(config.conditioning_threshold.is_finite() && config.conditioning_threshold > 0.0) {
            return Err(OnlineError::Config(format!(
                "conditioning threshold must be positive, got {}",
                config.conditioning_threshold
            )));
        }
        let rls = RlsState::new(config.forgetting, config.c0_scale)?;
        Ok(Self {
            config,
            svd: None,
            rls,
            abs_pose0: RigidMotion::identity(),
            abs_pose1: RigidMotion::identity(),
            lift0: SignContinuousLift::new(),
            lift1: SignContinuousLift::new(),
            frame: 0,
            buffer: Vec::new(),
            last: None,
        })
    }

    /// Ingests the two cameras' ego-motions for the same time interval and
    /// returns the updated estimate.
    pub fn step(
        &mut self,
        motion0: &RigidMotion,
        motion1: &RigidMotion,
    ) -> Result<CalibrationEstimate, OnlineError> {
        self.frame += 1;
        self.abs_pose0 = self.abs_pose0.compose(motion0);
        self.abs_pose1 = self.abs_pose1.compose(motion1);

        let (pose0, pose1) = if self.config.use_relative_constraints {
            (*motion0, *motion1)
        } else {
            (self.abs_pose0, self.abs_pose1)
        };

        let block = if self.config.use_relative_constraints {
            // Frame-to-frame rotations stay far from a half turn, so the
            // canonical representatives are already sign-coherent.
            build_a(&pose0.rotation, &pose1.rotation)
        } else {
            build_a_from_vectors(
                &self.lift0.next(&pose0.rotation),
                &self.lift1.next(&pose1.rotation),
            )
        };
        match self.svd.as_mut() {
            None => self.svd = Some(SvdState::new(&block)),
            Some(state) => state.absorb(&block),
        }
        let svd = self.svd.as_ref().expect("initialized above");
        let rotation = svd.solution();
        let conditioning = svd.conditioning_ratio();
        let delta_r = rotation.to_matrix();

        let rotation0 = pose0.rotation.to_matrix();
        let active = self.frame >= self.config.warmup_frames;
        if active {
            if self.config.buffer_warmup && !self.buffer.is_empty() {
                let deferred = std::mem::take(&mut self.buffer);
                for frame in &deferred {
                    self.rls.absorb(&RlsObservation {
                        matrix: build_b(&frame.rotation0, &delta_r, &frame.translation1),
                        rhs: frame.translation0,
                    })?;
                }
            }
            self.rls.absorb(&RlsObservation {
                matrix: build_b(&rotation0, &delta_r, &pose1.translation),
                rhs: pose0.translation,
            })?;
        } else if self.config.buffer_warmup {
            self.buffer.push(BufferedFrame {
                rotation0,
                translation0: pose0.translation,
                translation1: pose1.translation,
            });
        }

        let (translation, scale) =
            if active { self.rls.estimate() } else { (Vector3::zeros(), 0.0) };

        let estimate = CalibrationEstimate {
            transform: SimilarityTransform { rotation, translation, scale },
            rotation_conditioning: conditioning,
            rotation_ill_conditioned: conditioning < self.config.conditioning_threshold,
            translation_active: active,
            translation_magnitude_ratio: motion1.translation.norm() / motion0.translation.norm(),
            frame: self.frame,
        };
        self.last = Some(estimate.clone());
        Ok(estimate)
    }

    /// The estimate emitted by the most recent step.
    pub fn finalize(&self) -> Result<CalibrationEstimate, OnlineError> {
        self.last.clone().ok_or(OnlineError::NoData)
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn config(&self) -> &CalibratorConfig {
        &self.config
    }

    /// Accumulated pose of each camera relative to its starting frame.
    pub fn accumulated_poses(&self) -> (&RigidMotion, &RigidMotion) {
        (&self.abs_pose0, &self.abs_pose1)
    }

    pub fn rotation_frames_absorbed(&self) -> usize {
        self.svd.as_ref().map_or(0, SvdState::frames_absorbed)
    }

    pub fn translation_blocks_absorbed(&self) -> usize {
        self.rls.blocks_absorbed()
    }
}
