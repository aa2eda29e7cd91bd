//! Per-frame constraint matrices linking the two camera trajectories to the
//! rig transform, plus helpers for turning frame-to-frame motions into poses
//! relative to frame 0.
//!
//! For synchronized poses `q_t^0`, `q_t^1` of two rigidly coupled cameras,
//! the rig rotation `dq` satisfies `q_t^0 * dq = dq * q_t^1`; `build_a`
//! produces the 4x4 matrix whose nullspace encodes that identity. Once the
//! rotation is known, `build_b` produces the 3x4 block of the linear system
//! `B * (dT; dLambda) = T_t^0` for the rig translation and scale.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};

use crate::geometry::{RigidMotion, Trajectory, UnitQuaternion};

/// Rotation constraint block for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintMatrixA {
    pub entries: Matrix4<f64>,
}

/// Translation/scale constraint block for one frame: `[I - R_t^0 | dR T_t^1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintMatrixB {
    pub entries: Matrix3x4<f64>,
}

/// Builds the rotation constraint block from the two cameras' pose
/// quaternions at the same frame.
///
/// The entries are written out explicitly rather than assembled from
/// left/right multiplication matrices; the algebraic characterization
/// `A vec(p) = vec(q0*p - p*q1)` is enforced by tests, so a sign slip on
/// either side would be caught.
pub fn build_a(q0: &UnitQuaternion, q1: &UnitQuaternion) -> ConstraintMatrixA {
    build_a_from_vectors(&q0.as_vector(), &q1.as_vector())
}

/// `build_a` on raw `(w, x, y, z)` vectors. The constraint is linear in each
/// quaternion, so callers that track sign-continuous representatives (see
/// [`SignContinuousLift`]) can pass them directly.
pub fn build_a_from_vectors(q0: &Vector4<f64>, q1: &Vector4<f64>) -> ConstraintMatrixA {
    let (w0, x0, y0, z0) = (q0[0], q0[1], q0[2], q0[3]);
    let (w1, x1, y1, z1) = (q1[0], q1[1], q1[2], q1[3]);
    ConstraintMatrixA {
        entries: Matrix4::new(
            w0 - w1, -x0 + x1, -y0 + y1, -z0 + z1,
            x0 - x1, w0 - w1, -z0 - z1, y0 + y1,
            y0 - y1, z0 + z1, w0 - w1, -x0 - x1,
            z0 - z1, -y0 - y1, x0 + x1, w0 - w1,
        ),
    }
}

/// Sign-continuous representative of a quaternion pose sequence.
///
/// The rotation constraint is sign-sensitive: it holds for one choice of
/// quaternion signs per frame, and the canonical-hemisphere representative
/// breaks the pairing when a pose passes near a half turn, where noise can
/// flip one camera's sign but not the other's. Choosing each frame's sign
/// to keep the dot product with the previous frame nonnegative follows the
/// continuous path instead, which both cameras of a rigid rig agree on.
#[derive(Debug, Clone)]
pub struct SignContinuousLift {
    last: Vector4<f64>,
}

impl SignContinuousLift {
    /// Starts a lift for a sequence that begins at (or near) the identity.
    pub fn new() -> Self {
        Self { last: Vector4::new(1.0, 0.0, 0.0, 0.0) }
    }

    /// Returns the representative of `q` on the same sheet as the previous
    /// frame.
    pub fn next(&mut self, q: &UnitQuaternion) -> Vector4<f64> {
        let v = q.as_vector();
        self.last = if self.last.dot(&v) < 0.0 { -v } else { v };
        self.last
    }
}

impl Default for SignContinuousLift {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds the translation/scale constraint block `[I - r0 | delta_r * t1]`.
pub fn build_b(
    r0: &Matrix3<f64>,
    delta_r: &Matrix3<f64>,
    t1: &Vector3<f64>,
) -> ConstraintMatrixB {
    let left = Matrix3::identity() - r0;
    let right = delta_r * t1;
    let mut entries = Matrix3x4::zeros();
    entries.fixed_view_mut::<3, 3>(0, 0).copy_from(&left);
    entries.set_column(3, &right);
    ConstraintMatrixB { entries }
}

/// Norm of the rotation constraint violation `|A dq|` for a candidate rig
/// rotation.
pub fn rotation_residual(a: &ConstraintMatrixA, dq: &UnitQuaternion) -> f64 {
    (a.entries * dq.as_vector()).norm()
}

/// Chains frame-to-frame motions into poses relative to the starting frame:
/// `poses[0]` is the identity and `poses[t] = poses[t-1] * motions[t-1]`.
pub fn accumulate_relative(motions: &[RigidMotion]) -> Trajectory {
    let mut poses = Vec::with_capacity(motions.len() + 1);
    poses.push(RigidMotion::identity());
    for motion in motions {
        let next = poses.last().expect("nonempty").compose(motion);
        poses.push(next);
    }
    Trajectory::new(poses)
}
