use super::RigidMotion;

/// An ordered pose sequence, one pose per frame.
///
/// Calibration consumes trajectories rebased to their first frame (frame 0
/// is the identity); readers and the simulator produce them that way.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<RigidMotion>,
}

impl Trajectory {
    /// Wraps a nonempty pose sequence. Panics on an empty input; file
    /// readers reject empty files before constructing a trajectory.
    pub fn new(poses: Vec<RigidMotion>) -> Self {
        assert!(!poses.is_empty(), "a trajectory needs at least one pose");
        Self { poses }
    }

    /// Number of poses (frames 0..=frame_count).
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of motion steps, i.e. `len() - 1`.
    pub fn frame_count(&self) -> usize {
        self.poses.len() - 1
    }

    pub fn pose(&self, frame: usize) -> &RigidMotion {
        &self.poses[frame]
    }

    pub fn poses(&self) -> &[RigidMotion] {
        &self.poses
    }

    pub fn first(&self) -> &RigidMotion {
        &self.poses[0]
    }

    pub fn last(&self) -> &RigidMotion {
        self.poses.last().expect("trajectory is nonempty")
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RigidMotion> {
        self.poses.iter()
    }

    /// Frame-to-frame motions `m_t = pose(t-1)^-1 * pose(t)`, one per step.
    pub fn relative_motions(&self) -> Vec<RigidMotion> {
        self.poses
            .windows(2)
            .map(|pair| pair[0].invert().compose(&pair[1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[should_panic(expected = "at least one pose")]
    fn empty_trajectory_is_rejected() {
        let _ = Trajectory::new(Vec::new());
    }

    #[test]
    fn relative_motions_count_is_one_less_than_poses() {
        let traj = Trajectory::new(vec![RigidMotion::identity(); 5]);
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.frame_count(), 4);
        assert_eq!(traj.relative_motions().len(), 4);
    }
}
