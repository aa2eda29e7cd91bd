//! Synthetic rig and trajectory generation: a random fixed rig, a smooth
//! random trajectory for the master camera, the exactly consistent slave
//! trajectory implied by the rig, and Gaussian pose noise.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constraints::accumulate_relative;
use crate::geometry::{RigidMotion, SimilarityTransform, Trajectory, UnitQuaternion};

/// Parameters of the trajectory generator. The camera twist (angular and
/// linear velocity per frame) follows a damped random walk, which yields
/// smooth trajectories whose rotation axes wander across all directions.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of motion steps; the trajectory has `frames + 1` poses.
    pub frames: usize,
    /// Twist damping per frame, in (0, 1].
    pub damping: f64,
    /// Std of the per-axis angular velocity excitation, degrees per frame.
    pub process_noise_rot_deg: f64,
    /// Std of the per-axis linear velocity excitation, scene units per frame.
    pub process_noise_trans: f64,
    /// Starting angular velocity, degrees per frame.
    pub initial_angular_velocity_deg: Vector3<f64>,
    /// Starting linear velocity, scene units per frame.
    pub initial_linear_velocity: Vector3<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frames: 128,
            damping: 0.92,
            process_noise_rot_deg: 1.5,
            process_noise_trans: 0.02,
            initial_angular_velocity_deg: Vector3::zeros(),
            initial_linear_velocity: Vector3::zeros(),
            seed: 0,
        }
    }
}

/// Additive pose noise: a random small rotation and a per-axis Gaussian
/// translation offset per frame. Frame 0 is never perturbed.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    /// Per-axis std of the rotation-vector perturbation, degrees.
    pub rot_std_deg: f64,
    /// Per-axis std of the translation perturbation, scene units.
    pub trans_std: f64,
    pub seed: u64,
    /// Perturb frame-to-frame motions instead of the absolute poses.
    pub perturb_relative: bool,
}

impl NoiseModel {
    pub fn new(rot_std_deg: f64, trans_std: f64, seed: u64) -> Self {
        Self { rot_std_deg, trans_std, seed, perturb_relative: false }
    }
}

fn sample_vector(rng: &mut impl Rng, std: f64) -> Vector3<f64> {
    Vector3::new(
        std * rng.sample::<f64, _>(StandardNormal),
        std * rng.sample::<f64, _>(StandardNormal),
        std * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Draws a random rig: rotation uniform over orientations, unit-length
/// translation (the global scale ambiguity fixes the baseline to 1), and a
/// scale factor log-uniform in `[0.5, 2]`.
pub fn random_rig(seed: u64) -> SimilarityTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = UnitQuaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    let translation = sample_vector(&mut rng, 1.0).normalize();
    let scale = rng.random_range(0.5f64.ln()..=2.0f64.ln()).exp();
    SimilarityTransform::new(rotation, translation, scale).expect("scale in [0.5, 2]")
}

/// Generates the master trajectory by integrating the damped random-walk
/// twist: `v <- damping * v + w`, then one motion step per frame.
pub fn generate_master_trajectory(config: &SimConfig) -> Trajectory {
    assert!(config.frames >= 1, "need at least one motion step");
    assert!(
        config.damping > 0.0 && config.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut angular = config.initial_angular_velocity_deg.map(f64::to_radians);
    let mut linear = config.initial_linear_velocity;
    let rot_std = config.process_noise_rot_deg.to_radians();

    let mut motions = Vec::with_capacity(config.frames);
    for _ in 0..config.frames {
        angular = config.damping * angular + sample_vector(&mut rng, rot_std);
        linear = config.damping * linear + sample_vector(&mut rng, config.process_noise_trans);
        motions.push(RigidMotion::new(UnitQuaternion::from_rotation_vector(&angular), linear));
    }
    accumulate_relative(&motions)
}

/// Derives the slave trajectory that satisfies both rig constraints exactly:
/// rotations are conjugated by the rig rotation and translations follow the
/// inverse of the translation/scale constraint.
pub fn derive_slave_trajectory(master: &Trajectory, rig: &SimilarityTransform) -> Trajectory {
    let dq = rig.rotation;
    let dq_inv = dq.conjugate();
    let poses = master
        .iter()
        .map(|pose| {
            let q1 = dq_inv * pose.rotation * dq;
            let rotated_offset = rig.translation - pose.rotation.rotate(&rig.translation);
            let t1 = dq_inv.rotate(&(pose.translation - rotated_offset)) / rig.scale;
            RigidMotion::new(q1, t1)
        })
        .collect();
    Trajectory::new(poses)
}

/// Applies independent Gaussian perturbations to every frame except frame 0.
pub fn add_noise(trajectory: &Trajectory, noise: &NoiseModel) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let rot_std = noise.rot_std_deg.to_radians();

    let perturb = |pose: &RigidMotion, rng: &mut ChaCha8Rng| {
        let rotation = pose.rotation
            * UnitQuaternion::from_rotation_vector(&sample_vector(rng, rot_std));
        let translation = pose.translation + sample_vector(rng, noise.trans_std);
        RigidMotion::new(rotation, translation)
    };

    if noise.perturb_relative {
        let motions: Vec<_> = trajectory
            .relative_motions()
            .iter()
            .map(|m| perturb(m, &mut rng))
            .collect();
        return accumulate_relative(&motions);
    }

    let poses = trajectory
        .iter()
        .enumerate()
        .map(|(t, pose)| if t == 0 { *pose } else { perturb(pose, &mut rng) })
        .collect();
    Trajectory::new(poses)
}
