use nalgebra::Vector3;

use super::{GeometryError, UnitQuaternion};

/// A rigid transform: rotation followed by translation, acting on points as
/// `p -> R p + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: UnitQuaternion,
    pub translation: Vector3<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    /// `self` composed with `other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation.rotate(&other.translation),
        }
    }

    pub fn invert(&self) -> Self {
        let inv_rot = self.rotation.conjugate();
        Self { rotation: inv_rot, translation: -inv_rot.rotate(&self.translation) }
    }

    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(point) + self.translation
    }
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rotation, translation and uniform scale relating two camera coordinate
/// frames. Scale appears because monocular ego-motion recovers translation
/// only up to an unknown per-camera factor.
///
/// `new` enforces a positive finite scale. Struct literals remain available
/// for the "translation not yet estimated" sentinel (`scale = 0`) that the
/// online estimator emits during warm-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vector3::zeros(), scale: 1.0 }
    }

    pub fn new(
        rotation: UnitQuaternion,
        translation: Vector3<f64>,
        scale: f64,
    ) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        Ok(Self { rotation, translation, scale })
    }
}
