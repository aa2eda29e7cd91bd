//! Exact batch solutions of the rotation and translation/scale problems.
//! These double as the reference against which the online estimators are
//! validated and as a standalone calibration mode for recorded trajectories.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector3, Vector4};

use crate::constraints::{build_a_from_vectors, build_b, ConstraintMatrixA, SignContinuousLift};
use crate::geometry::{SimilarityTransform, Trajectory, UnitQuaternion};
use crate::rls::RlsObservation;

/// Relative gap between the two smallest eigenvalues of the accumulated
/// normal matrix under which the rotation solution is flagged as
/// ill-conditioned.
const ROTATION_GAP_LIMIT: f64 = 1e-9;
/// Relative singular-value cutoff for the translation stack rank test.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("no constraint blocks to solve")]
    Empty,
    #[error("trajectory lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error(
        "rotation problem is ill-conditioned (relative eigenvalue gap {gap:.3e}); \
         the rig motion does not observe the rotation"
    )]
    IllConditioned { gap: f64 },
    #[error(
        "translation stack is rank deficient (sigma_min/sigma_max = {ratio:.3e}); \
         the rig motion does not observe translation and scale"
    )]
    RankDeficient { ratio: f64 },
    #[error("recovered scale {0} is not positive; the data is inconsistent")]
    NonPositiveScale(f64),
}

/// Batch rotation estimate with conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct RotationSolution {
    pub rotation: UnitQuaternion,
    /// Ratio of the second-smallest to smallest singular value of the
    /// stacked constraints; near 1 means the solution direction is ambiguous.
    pub conditioning: f64,
    /// Gap between the two smallest eigenvalues of the normal matrix,
    /// relative to the largest eigenvalue.
    pub relative_gap: f64,
}

impl RotationSolution {
    pub fn is_ill_conditioned(&self) -> bool {
        self.relative_gap < ROTATION_GAP_LIMIT
    }
}

/// Exponential observation weights plus the matching prior term, used to
/// reproduce the recursive estimator's fixed point from the batch side.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialWeights {
    pub forgetting: f64,
    pub c0_scale: f64,
}

/// Solves for the rig rotation from all constraint blocks at once: the unit
/// eigenvector of the accumulated normal matrix `sum A'A` for its smallest
/// eigenvalue. The stack itself is never materialized.
pub fn solve_rotation_batch(blocks: &[ConstraintMatrixA]) -> Result<RotationSolution, BatchError> {
    if blocks.is_empty() {
        return Err(BatchError::Empty);
    }
    let mut normal = Matrix4::zeros();
    for block in blocks {
        normal += block.entries.transpose() * block.entries;
    }

    let eigen = SymmetricEigen::new(normal);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
    let smallest = eigen.eigenvectors.column(order[3]);

    let rotation = UnitQuaternion::from_vector(&Vector4::new(
        smallest[0],
        smallest[1],
        smallest[2],
        smallest[3],
    ));
    let conditioning = if values[3] > 0.0 {
        (values[2] / values[3]).sqrt()
    } else if values[2] > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let relative_gap = if values[0] > 0.0 { (values[2] - values[3]) / values[0] } else { 0.0 };

    Ok(RotationSolution { rotation, conditioning, relative_gap })
}

/// Solves the stacked translation/scale system by orthogonal factorization.
/// With `weights`, rows are scaled by the square roots of the exponential
/// profile and the prior rows `sqrt(lambda^N / c0) I` are appended, making
/// the minimizer identical to the recursive estimator's state after the same
/// observations.
pub fn solve_translation_batch(
    observations: &[RlsObservation],
    weights: Option<&ExponentialWeights>,
) -> Result<(Vector3<f64>, f64), BatchError> {
    if observations.is_empty() {
        return Err(BatchError::Empty);
    }
    let n = observations.len();
    let prior_rows = if weights.is_some() { 4 } else { 0 };
    let mut stack = DMatrix::<f64>::zeros(3 * n + prior_rows, 4);
    let mut rhs = DVector::<f64>::zeros(3 * n + prior_rows);

    for (t, obs) in observations.iter().enumerate() {
        let weight = match weights {
            Some(w) => w.forgetting.powi((n - 1 - t) as i32).sqrt(),
            None => 1.0,
        };
        for r in 0..3 {
            for c in 0..4 {
                stack[(3 * t + r, c)] = weight * obs.matrix.entries[(r, c)];
            }
            rhs[3 * t + r] = weight * obs.rhs[r];
        }
    }

    // Rank test on the data rows only; the prior rows would mask a
    // deficient stack.
    let data_values = stack
        .view((0, 0), (3 * n, 4))
        .clone_owned()
        .svd(false, false)
        .singular_values;
    let ratio = if data_values[0] > 0.0 { data_values[3] / data_values[0] } else { 0.0 };
    if ratio < RANK_TOLERANCE {
        return Err(BatchError::RankDeficient { ratio });
    }

    if let Some(w) = weights {
        let prior = (w.forgetting.powi(n as i32) / w.c0_scale).sqrt();
        for i in 0..4 {
            stack[(3 * n + i, i)] = prior;
        }
    }

    let svd = stack.svd(true, true);
    let cutoff = svd.singular_values[0] * 1e-13;
    let solution = svd.solve(&rhs, cutoff).expect("svd solve with u and v computed");
    Ok((Vector3::new(solution[0], solution[1], solution[2]), solution[3]))
}

/// Two-stage batch calibration: rotation from every frame's pose pair, then
/// translation and scale with the recovered rotation substituted into each
/// translation block.
pub fn calibrate_batch(
    traj0: &Trajectory,
    traj1: &Trajectory,
) -> Result<SimilarityTransform, BatchError> {
    if traj0.len() != traj1.len() {
        return Err(BatchError::LengthMismatch { left: traj0.len(), right: traj1.len() });
    }
    let mut lift0 = SignContinuousLift::new();
    let mut lift1 = SignContinuousLift::new();
    let blocks: Vec<ConstraintMatrixA> = (1..traj0.len())
        .map(|t| {
            build_a_from_vectors(
                &lift0.next(&traj0.pose(t).rotation),
                &lift1.next(&traj1.pose(t).rotation),
            )
        })
        .collect();
    if blocks.is_empty() {
        // A single-pose trajectory carries no motion at all.
        return Err(BatchError::IllConditioned { gap: 0.0 });
    }

    let rotation = solve_rotation_batch(&blocks)?;
    if rotation.is_ill_conditioned() {
        return Err(BatchError::IllConditioned { gap: rotation.relative_gap });
    }

    let delta_r = rotation.rotation.to_matrix();
    let observations: Vec<RlsObservation> = (1..traj0.len())
        .map(|t| RlsObservation {
            matrix: build_b(
                &traj0.pose(t).rotation.to_matrix(),
                &delta_r,
                &traj1.pose(t).translation,
            ),
            rhs: traj0.pose(t).translation,
        })
        .collect();
    let (translation, scale) = solve_translation_batch(&observations, None)?;

    SimilarityTransform::new(rotation.rotation, translation, scale)
        .map_err(|_| BatchError::NonPositiveScale(scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_a;
    use crate::incremental_svd::SvdState;
    use crate::rls::RlsState;
    use crate::sim::{
        add_noise, derive_slave_trajectory, generate_master_trajectory, random_rig, NoiseModel,
        SimConfig,
    };
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_quaternion(rng: &mut impl Rng) -> UnitQuaternion {
        UnitQuaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        )
    }

    fn consistent_blocks(rng: &mut impl Rng, dq: &UnitQuaternion, count: usize) -> Vec<ConstraintMatrixA> {
        (0..count)
            .map(|_| {
                let q0 = random_quaternion(rng);
                let q1 = dq.conjugate() * q0 * *dq;
                build_a(&q0, &q1)
            })
            .collect()
    }

    #[test]
    fn noise_free_stream_recovers_the_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..10 {
            let dq = random_quaternion(&mut rng);
            let blocks = consistent_blocks(&mut rng, &dq, 32);
            let solution = solve_rotation_batch(&blocks).unwrap();
            assert!(solution.rotation.geodesic_angle_deg(&dq) < 1e-8);
            assert!(!solution.is_ill_conditioned());
        }
    }

    #[test]
    fn equal_pose_stream_returns_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let blocks: Vec<_> = (0..20)
            .map(|_| {
                let q = random_quaternion(&mut rng);
                build_a(&q, &q)
            })
            .collect();
        let solution = solve_rotation_batch(&blocks).unwrap();
        assert!(solution.rotation.geodesic_angle_deg(&UnitQuaternion::identity()) < 1e-6);
        assert!(!solution.is_ill_conditioned());
    }

    #[test]
    fn single_axis_motion_is_flagged_ill_conditioned() {
        let blocks: Vec<_> = (1..20)
            .map(|i| {
                let q = UnitQuaternion::from_axis_angle(&Vector3::x(), 0.1 * i as f64);
                build_a(&q, &q)
            })
            .collect();
        let solution = solve_rotation_batch(&blocks).unwrap();
        assert!(solution.is_ill_conditioned());
        assert!(solution.conditioning < 10.0);
    }

    #[test]
    fn empty_block_list_is_rejected() {
        assert!(matches!(solve_rotation_batch(&[]), Err(BatchError::Empty)));
    }

    #[test]
    fn single_frame_agrees_with_the_incremental_path_on_the_objective() {
        // One block has exactly paired singular values, so the minimizing
        // direction is a whole 2-plane and the solvers may pick different
        // vectors in it; what must agree is the residual they achieve.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let q0 = random_quaternion(&mut rng);
            let q1 = random_quaternion(&mut rng);
            let block = build_a(&q0, &q1);
            let batch = solve_rotation_batch(&[block]).unwrap();
            let state = SvdState::new(&block);
            let r_batch = (block.entries * batch.rotation.as_vector()).norm();
            let r_incr = (block.entries * state.solution().as_vector()).norm();
            assert!((r_batch - r_incr).abs() < 1e-12);
            let sigma_min = block.entries.svd(false, false).singular_values[3];
            assert!((r_batch - sigma_min).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_solve_recovers_the_forward_model() {
        let master = generate_master_trajectory(&SimConfig { frames: 64, seed: 6, ..SimConfig::default() });
        let rig = random_rig(8);
        let slave = derive_slave_trajectory(&master, &rig);
        let dr = rig.rotation.to_matrix();
        let observations: Vec<_> = (1..master.len())
            .map(|t| RlsObservation {
                matrix: build_b(&master.pose(t).rotation.to_matrix(), &dr, &slave.pose(t).translation),
                rhs: master.pose(t).translation,
            })
            .collect();
        let (translation, scale) = solve_translation_batch(&observations, None).unwrap();
        assert!((translation - rig.translation).norm() < 1e-10);
        assert!((scale - rig.scale).abs() < 1e-10);
    }

    #[test]
    fn stationary_rotations_make_translation_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let observations: Vec<_> = (0..20)
            .map(|_| {
                let t1 = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                RlsObservation {
                    matrix: build_b(&Matrix3::identity(), &Matrix3::identity(), &t1),
                    rhs: Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
                }
            })
            .collect();
        assert!(matches!(
            solve_translation_batch(&observations, None),
            Err(BatchError::RankDeficient { .. })
        ));
    }

    #[test]
    fn weighted_batch_matches_the_recursive_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for &forgetting in &[0.9, 0.95, 1.0] {
            let observations: Vec<_> = (0..48)
                .map(|_| RlsObservation {
                    matrix: crate::constraints::ConstraintMatrixB {
                        entries: nalgebra::Matrix3x4::from_fn(|_, _| {
                            rng.sample::<f64, _>(StandardNormal)
                        }),
                    },
                    rhs: Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
                })
                .collect();
            let mut state = RlsState::new(forgetting, 1.0).unwrap();
            for obs in &observations {
                state.absorb(obs).unwrap();
            }
            let weights = ExponentialWeights { forgetting, c0_scale: 1.0 };
            let (translation, scale) = solve_translation_batch(&observations, Some(&weights)).unwrap();
            let (rls_translation, rls_scale) = state.estimate();
            assert!((translation - rls_translation).norm() < 1e-8);
            assert!((scale - rls_scale).abs() < 1e-8);
        }
    }

    #[test]
    fn full_batch_calibration_closes_the_loop() {
        let master = generate_master_trajectory(&SimConfig { frames: 128, seed: 12, ..SimConfig::default() });
        let rig = random_rig(13);
        let slave = derive_slave_trajectory(&master, &rig);
        let recovered = calibrate_batch(&master, &slave).unwrap();
        assert!(recovered.rotation.geodesic_angle_deg(&rig.rotation) < 1e-8);
        let direction = crate::metrics::direction_angle_deg(&recovered.translation, &rig.translation);
        assert!(direction < 1e-6);
        assert!((recovered.scale - rig.scale).abs() / rig.scale < 1e-10);
    }

    #[test]
    fn motionless_trajectories_are_ill_conditioned() {
        let single = Trajectory::new(vec![crate::geometry::RigidMotion::identity()]);
        assert!(matches!(
            calibrate_batch(&single, &single),
            Err(BatchError::IllConditioned { .. })
        ));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = generate_master_trajectory(&SimConfig { frames: 8, ..SimConfig::default() });
        let b = generate_master_trajectory(&SimConfig { frames: 9, ..SimConfig::default() });
        assert!(matches!(calibrate_batch(&a, &b), Err(BatchError::LengthMismatch { .. })));
    }

    #[test]
    fn identical_trajectories_calibrate_to_the_identity_rig() {
        let master = generate_master_trajectory(&SimConfig { frames: 96, seed: 21, ..SimConfig::default() });
        let recovered = calibrate_batch(&master, &master).unwrap();
        assert!(recovered.rotation.geodesic_angle_deg(&UnitQuaternion::identity()) < 1e-6);
        assert!(recovered.translation.norm() < 1e-8);
        assert!((recovered.scale - 1.0).abs() < 1e-8);
    }

    #[test]
    fn poses_crossing_a_half_turn_stay_calibratable_under_noise() {
        // The accumulated rotation sweeps far past 180 degrees. Without
        // sign-continuous constraint assembly, noise near the half turn
        // flips one camera's canonical quaternion but not the other's and
        // the estimate breaks down.
        let config = SimConfig {
            frames: 128,
            damping: 1.0,
            process_noise_rot_deg: 0.4,
            process_noise_trans: 0.01,
            initial_angular_velocity_deg: Vector3::new(2.0, 1.5, 0.5),
            initial_linear_velocity: Vector3::new(0.05, 0.0, 0.02),
            seed: 31,
        };
        let master = generate_master_trajectory(&config);
        let max_angle = master
            .iter()
            .map(|p| p.rotation.angle_rad().to_degrees())
            .fold(0.0f64, f64::max);
        assert!(max_angle > 175.0, "scenario must cross the half turn, got {max_angle}");

        let rig = random_rig(32);
        let slave = derive_slave_trajectory(&master, &rig);
        let noisy0 = add_noise(&master, &NoiseModel::new(0.5, 0.005, 33));
        let noisy1 = add_noise(&slave, &NoiseModel::new(0.5, 0.005, 34));
        let recovered = calibrate_batch(&noisy0, &noisy1).unwrap();
        let error = recovered.rotation.geodesic_angle_deg(&rig.rotation);
        assert!(error < 1.0, "rotation error {error} deg");
    }

    #[test]
    fn median_batch_error_grows_with_noise() {
        let levels = [0.1, 0.5, 1.0, 2.0];
        let mut medians = Vec::new();
        for (li, &rot_std) in levels.iter().enumerate() {
            let mut errors: Vec<f64> = (0..50)
                .map(|trial| {
                    let seed = (li * 100 + trial) as u64;
                    let master = generate_master_trajectory(&SimConfig {
                        frames: 96,
                        seed,
                        ..SimConfig::default()
                    });
                    let rig = random_rig(seed + 7_000);
                    let slave = derive_slave_trajectory(&master, &rig);
                    let noisy0 =
                        add_noise(&master, &NoiseModel::new(rot_std, rot_std * 0.01, seed + 1));
                    let noisy1 =
                        add_noise(&slave, &NoiseModel::new(rot_std, rot_std * 0.01, seed + 2));
                    match calibrate_batch(&noisy0, &noisy1) {
                        Ok(est) => est.rotation.geodesic_angle_deg(&rig.rotation),
                        Err(_) => f64::INFINITY,
                    }
                })
                .collect();
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(errors[errors.len() / 2]);
        }
        for pair in medians.windows(2) {
            assert!(pair[0] <= pair[1], "medians not monotone: {medians:?}");
        }
    }
}
