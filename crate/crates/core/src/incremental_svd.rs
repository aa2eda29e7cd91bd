//! Incremental right-singular-subspace tracking for the growing stack of
//! rotation constraint blocks.
//!
//! Only the singular values and right singular vectors are kept: the
//! rotation solution is the right singular vector of the least singular
//! value, and since each appended block is square, the running `V` factor
//! stays orthogonal and the left factor is never needed. Appending a block
//! reduces to one dense SVD of an 8x4 stack.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, Vector4};

use crate::constraints::ConstraintMatrixA;
use crate::geometry::UnitQuaternion;

/// Re-orthonormalize `V` after this many updates even if drift has not been
/// detected yet.
const RENORMALIZE_INTERVAL: usize = 256;
/// Frobenius drift of `V^T V` from the identity that forces an immediate
/// re-orthonormalization.
const ORTHOGONALITY_DRIFT_LIMIT: f64 = 1e-9;

/// Running factorization of the stacked rotation constraints.
///
/// Internally the singular values are stored normalized to a unit largest
/// entry together with the accumulated scale, because the raw values grow
/// like the square root of the frame count. Normalizing the whole implicit
/// stack (values and incoming block alike) leaves the right singular vectors
/// untouched, so the subspace stays exactly the batch one.
#[derive(Debug, Clone)]
pub struct SvdState {
    /// Normalized singular values, descending; all zero for an all-zero stack.
    normalized: Vector4<f64>,
    /// Largest raw singular value of the absorbed stack; zero if none.
    scale: f64,
    v: Matrix4<f64>,
    frames_absorbed: usize,
    updates_since_renormalize: usize,
}

impl SvdState {
    /// Absorbs the first constraint block via a full SVD.
    ///
    /// An all-zero block (a stationary first frame) yields the degenerate
    /// state `S = 0`, `V = I`; later updates proceed normally from there.
    pub fn new(first: &ConstraintMatrixA) -> Self {
        let svd = first.entries.svd(false, true);
        let values = svd.singular_values;
        let largest = values[0];
        if largest <= 0.0 {
            return Self {
                normalized: Vector4::zeros(),
                scale: 0.0,
                v: Matrix4::identity(),
                frames_absorbed: 1,
                updates_since_renormalize: 0,
            };
        }
        Self {
            normalized: values / largest,
            scale: largest,
            v: svd.v_t.expect("v_t requested").transpose(),
            frames_absorbed: 1,
            updates_since_renormalize: 0,
        }
    }

    /// Absorbs one more 4x4 block: computes the thin SVD of the stack of the
    /// current singular values over the rotated block, then pushes the inner
    /// right factor onto `V`. The resulting subspace matches a batch SVD of
    /// every absorbed block.
    pub fn absorb(&mut self, block: &ConstraintMatrixA) {
        let divisor = if self.scale > 0.0 { self.scale } else { 1.0 };
        let rotated = (block.entries * self.v) / divisor;

        let mut stack = SMatrix::<f64, 8, 4>::zeros();
        for i in 0..4 {
            stack[(i, i)] = self.normalized[i];
        }
        stack.fixed_view_mut::<4, 4>(4, 0).copy_from(&rotated);

        self.frames_absorbed += 1;
        if stack.iter().all(|value| *value == 0.0) {
            return;
        }

        let svd = stack.svd(false, true);
        let values = svd.singular_values;
        let inner_v = svd.v_t.expect("v_t requested").transpose();

        self.v *= inner_v;
        let largest = values[0];
        self.normalized = values / largest;
        self.scale = divisor * largest;

        self.updates_since_renormalize += 1;
        let drift = (self.v.transpose() * self.v - Matrix4::identity()).norm();
        if self.updates_since_renormalize >= RENORMALIZE_INTERVAL || drift > ORTHOGONALITY_DRIFT_LIMIT
        {
            self.renormalize_v();
        }
    }

    /// Rotation solution: the right singular vector of the least singular
    /// value, canonicalized. With near-coincident smallest singular values
    /// (rig motion that never excites a second rotation axis) the returned
    /// vector is whichever direction the inner SVD ordered last; callers
    /// should consult `conditioning_ratio` before trusting it.
    pub fn solution(&self) -> UnitQuaternion {
        let column = self.v.column(3);
        UnitQuaternion::from_vector(&Vector4::new(column[0], column[1], column[2], column[3]))
    }

    /// Raw singular values of the absorbed stack, descending.
    pub fn singular_values(&self) -> Vector4<f64> {
        self.normalized * self.scale
    }

    pub fn v(&self) -> &Matrix4<f64> {
        &self.v
    }

    pub fn frames_absorbed(&self) -> usize {
        self.frames_absorbed
    }

    /// Ratio of the second-smallest to the smallest singular value. Large
    /// values mean the rotation solution is well separated; values near 1
    /// signal a physically unobservable rotation axis.
    pub fn conditioning_ratio(&self) -> f64 {
        let s2 = self.normalized[2];
        let s3 = self.normalized[3];
        if s3 > 0.0 {
            s2 / s3
        } else if s2 > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }

    fn renormalize_v(&mut self) {
        let svd = self.v.svd(true, true);
        self.v = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
        self.updates_since_renormalize = 0;
    }
}

/// Thin SVD triple for arbitrary rectangular matrices, used by the general
/// row-append update. `u` and `v` hold orthonormal columns and `s` is
/// descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let svd = m.clone().svd(true, true);
        Self {
            u: svd.u.expect("u requested"),
            s: svd.singular_values,
            v: svd.v_t.expect("v_t requested").transpose(),
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// General three-step row-append update: orthonormalize the part of the
    /// new rows outside `span(V)`, take the SVD of the small middle matrix,
    /// and recombine. Directions of the new rows already inside `span(V)`
    /// contribute no new basis columns, so a rank-deficient projection
    /// simply shrinks the middle matrix.
    pub fn append_rows(&self, rows: &DMatrix<f64>) -> ThinSvd {
        let k = self.s.len();
        let n = self.v.nrows();
        let m = rows.nrows();
        assert_eq!(rows.ncols(), n, "appended rows must match the column count");

        // Residual of the new rows outside the current right subspace.
        let projected = rows.transpose() - &self.v * (self.v.transpose() * rows.transpose());
        let magnitude = rows.norm().max(1.0);
        let q = orthonormal_columns(&projected, &self.v, 1e-12 * magnitude);
        let j = q.ncols();

        // Middle matrix [ diag(s)  0 ; rows*V  (Q^T residual)^T ].
        let mut middle = DMatrix::<f64>::zeros(k + m, k + j);
        for i in 0..k {
            middle[(i, i)] = self.s[i];
        }
        middle.view_mut((k, 0), (m, k)).copy_from(&(rows * &self.v));
        if j > 0 {
            let l = q.transpose() * &projected;
            middle.view_mut((k, k), (m, j)).copy_from(&l.transpose());
        }

        let inner = middle.svd(true, true);
        let inner_u = inner.u.expect("u requested");
        let inner_v = inner.v_t.expect("v_t requested").transpose();
        let p = inner.singular_values.len();

        // Recombine: left factor gets the block-diagonal [U 0; 0 I] rotation,
        // right factor gets [V Q].
        let mut u = DMatrix::<f64>::zeros(self.u.nrows() + m, p);
        u.view_mut((0, 0), (self.u.nrows(), p))
            .copy_from(&(&self.u * inner_u.view((0, 0), (k, p))));
        u.view_mut((self.u.nrows(), 0), (m, p))
            .copy_from(&inner_u.view((k, 0), (m, p)).clone_owned());

        let mut extended = DMatrix::<f64>::zeros(n, k + j);
        extended.view_mut((0, 0), (n, k)).copy_from(&self.v);
        if j > 0 {
            extended.view_mut((0, k), (n, j)).copy_from(&q);
        }
        let v = extended * &inner_v;

        ThinSvd { u, s: inner.singular_values, v }
    }
}

/// Two-pass modified Gram-Schmidt of the columns of `m` against `basis` and
/// each other, dropping columns whose residual norm falls below `tol`.
fn orthonormal_columns(m: &DMatrix<f64>, basis: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for col in m.column_iter() {
        let mut w = col.clone_owned();
        for _ in 0..2 {
            w -= basis * (basis.transpose() * &w);
            for q in &kept {
                let coeff = q.dot(&w);
                w -= q * coeff;
            }
        }
        let norm = w.norm();
        if norm > tol {
            kept.push(w / norm);
        }
    }
    let mut q = DMatrix::<f64>::zeros(n, kept.len());
    for (i, col) in kept.iter().enumerate() {
        q.set_column(i, col);
    }
    q
}
