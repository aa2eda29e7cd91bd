//! Quaternion and rigid/similarity transform algebra shared by every
//! estimation stage. All types are plain values; operations are pure.

mod motion;
mod quaternion;
mod trajectory;

pub use motion::{RigidMotion, SimilarityTransform};
pub use quaternion::UnitQuaternion;
pub use trajectory::Trajectory;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("matrix is not a rotation (det {det:.6}, orthogonality residual {residual:.3e})")]
    NotARotation { det: f64, residual: f64 },
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
}
