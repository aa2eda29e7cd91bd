use std::ops::Mul;

use nalgebra::{Matrix3, Vector3, Vector4};

use super::GeometryError;

/// Orthogonality residual above which a matrix is rejected instead of being
/// projected onto the nearest rotation.
const ROTATION_RESIDUAL_LIMIT: f64 = 1e-3;

/// Unit quaternion in scalar-first `(w, x, y, z)` order.
///
/// Every constructor normalizes the components and maps the result onto the
/// canonical hemisphere (`w >= 0`, ties broken by the first nonzero vector
/// component), so two values describing the same rotation are represented
/// identically. This keeps downstream estimates deterministic even though a
/// rotation has two quaternion representatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Builds a unit quaternion from raw components, normalizing and
    /// canonicalizing. Panics if the component norm is zero or non-finite;
    /// file ingestion validates norms before calling this.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        assert!(
            norm.is_finite() && norm > 0.0,
            "quaternion components must have a positive finite norm (got {norm})"
        );
        // Skip the division when the input is already unit to the last few
        // ulps, so products with exact identities stay bit-identical.
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            Self { w, x, y, z }.canonicalized()
        } else {
            Self { w: w / norm, x: x / norm, y: y / norm, z: z / norm }.canonicalized()
        }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Components as a 4-vector in `(w, x, y, z)` order.
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let axis = axis.normalize();
        let half = 0.5 * angle_rad;
        let s = half.sin();
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Rotation-vector exponential: the direction of `v` is the axis, its
    /// norm the angle in radians. The zero vector maps to the identity.
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Self::identity();
        }
        Self::from_axis_angle(&(v / angle), angle)
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }.canonicalized()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle_rad(&self) -> f64 {
        2.0 * self.w.clamp(-1.0, 1.0).acos()
    }

    /// Unit rotation axis, or `None` for a (numerically) zero rotation.
    pub fn axis(&self) -> Option<Vector3<f64>> {
        let v = Vector3::new(self.x, self.y, self.z);
        let n = v.norm();
        if n == 0.0 {
            None
        } else {
            Some(v / n)
        }
    }

    /// Column-major rotation matrix equivalent of this quaternion.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a rotation matrix to a quaternion.
    ///
    /// Inputs within `1e-3` Frobenius residual of orthogonality are projected
    /// onto the nearest rotation first, which tolerates the round-off of
    /// poses read from text files. Matrices beyond that residual, or with a
    /// negative determinant, are rejected.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        let det = m.determinant();
        let residual = (m.transpose() * m - Matrix3::identity()).norm();
        if det < 0.0 || residual > ROTATION_RESIDUAL_LIMIT || !residual.is_finite() {
            return Err(GeometryError::NotARotation { det, residual });
        }
        let r = nearest_rotation(m);

        // Shepperd's method, branching on the largest diagonal term.
        let trace = r.trace();
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            )
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            (
                (r[(2, 1)] - r[(1, 2)]) / s,
                0.25 * s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
            )
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            (
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                0.25 * s,
                (r[(1, 2)] + r[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            (
                (r[(1, 0)] - r[(0, 1)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
                (r[(1, 2)] + r[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Ok(Self::new(w, x, y, z))
    }

    /// Applies the rotation to a vector without forming the matrix.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Angle in degrees between the rotations described by `self` and
    /// `other`, in `[0, 180]`; invariant under the quaternion double cover.
    ///
    /// Computed from the chord via `atan2`, which stays accurate down to the
    /// last ulp near zero where an `acos` of the dot product loses eight
    /// digits.
    pub fn geodesic_angle_deg(&self, other: &Self) -> f64 {
        let a = self.as_vector();
        let mut b = other.as_vector();
        if a.dot(&b) < 0.0 {
            b = -b;
        }
        (4.0 * (a - b).norm().atan2((a + b).norm())).to_degrees()
    }

    fn canonicalized(self) -> Self {
        let Self { w, x, y, z } = self;
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        if flip {
            Self { w: -w, x: -x, y: -y, z: -z }
        } else {
            self
        }
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product, renormalized and canonicalized.
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        let (aw, ax, ay, az) = (self.w, self.x, self.y, self.z);
        let (bw, bx, by, bz) = (rhs.w, rhs.x, rhs.y, rhs.z);
        UnitQuaternion::new(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )
    }
}

/// Projects a near-rotation onto the closest special orthogonal matrix.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    let d = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}
