//! Cholesky factors with an escalating jitter ladder and rank-one extension.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative jitter ladder: `1e-10, 1e-9, …, 1e-4`, multiplied by the output scale.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl CholFactor {
    /// Factorizes `matrix + (diag + j·scale)·I`, trying `j = 0` first and then
    /// walking up the jitter ladder until the factorization succeeds.
    pub fn with_jitter(matrix: &DMatrix<f64>, diag: f64, scale: f64) -> Result<Self> {
        Self::with_jitter_from(matrix, diag, scale, 0)
    }

    /// Same as [`CholFactor::with_jitter`], starting at ladder rung `start`.
    pub fn with_jitter_from(
        matrix: &DMatrix<f64>,
        diag: f64,
        scale: f64,
        start: usize,
    ) -> Result<Self> {
        let n = matrix.nrows();
        let exact = if start == 0 { Some(&0.0) } else { None };
        for rel in exact.into_iter().chain(JITTER_LADDER.iter().skip(start)) {
            let jitter = diag + rel * scale;
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.unpack();
                // a jitter-free factor whose pivots fall below the first rung is no
                // more exact than the jittered one and far less stable
                let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v * v));
                if *rel == 0.0 && min_pivot < JITTER_LADDER[0] * scale {
                    continue;
                }
                return Ok(Self { l, jitter });
            }
        }
        Err(Error::Conditioning(format!(
            "{n}×{n} kernel matrix not positive definite up to relative jitter {:e}",
            JITTER_LADDER[JITTER_LADDER.len() - 1]
        )))
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Total diagonal term added before factorizing (noise plus jitter).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_mut(&self, b: &mut DVector<f64>) {
        let ok = self.l.solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_mut(&mut x);
        x
    }

    /// Solves `L X = B` for a matrix right-hand side.
    pub fn solve_lower_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        let ok = self.l.solve_lower_triangular_mut(&mut x);
        debug_assert!(ok);
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_lower(b);
        let ok = self.l.tr_solve_lower_triangular_mut(&mut x);
        debug_assert!(ok);
        x
    }

    /// Explicit inverse of `L Lᵀ`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::identity(n, n);
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Appends one row/column: given the new column `cross` of the unjittered
    /// matrix and its diagonal entry `corner` (both without the diagonal
    /// term), returns the factor of the bordered matrix using the same jitter.
    pub fn extend(&self, cross: &DVector<f64>, corner: f64) -> Result<Self> {
        let n = self.dim();
        let l21 = self.solve_lower(cross);
        let schur = corner + self.jitter - l21.norm_squared();
        if !(schur > 0.0) {
            return Err(Error::Conditioning(format!(
                "rank-one extension has nonpositive pivot {schur:e}"
            )));
        }
        let mut l = DMatrix::zeros(n + 1, n + 1);
        l.view_mut((0, 0), (n, n)).copy_from(&self.l);
        for j in 0..n {
            l[(n, j)] = l21[j];
        }
        l[(n, n)] = schur.sqrt();
        Ok(Self {
            l,
            jitter: self.jitter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 + (i == j) as u8 as f64);
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn factor_reconstructs_and_solves() {
        let a = spd(6);
        let f = CholFactor::with_jitter(&a, 0.0, 1.0).unwrap();
        let mut shifted = a.clone();
        for i in 0..6 {
            shifted[(i, i)] += f.jitter();
        }
        let rec = f.l() * f.l().transpose();
        assert!((rec - &shifted).abs().max() < 1e-10);
        let b = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let x = f.solve(&b);
        assert!((&shifted * x - b).abs().max() < 1e-10);
        assert!((f.inverse() * &shifted - DMatrix::identity(6, 6)).abs().max() < 1e-10);
    }

    #[test]
    fn extension_matches_direct_factorization() {
        let a = spd(7);
        let top = a.view((0, 0), (6, 6)).into_owned();
        let f = CholFactor::with_jitter(&top, 0.0, 1.0).unwrap();
        let cross = a.view((0, 6), (6, 1)).column(0).into_owned();
        let ext = f.extend(&cross, a[(6, 6)]).unwrap();
        let mut shifted = a.clone();
        for i in 0..7 {
            shifted[(i, i)] += f.jitter();
        }
        assert!((ext.l() * ext.l().transpose() - shifted).abs().max() < 1e-10);
    }

    #[test]
    fn singular_matrix_escalates_jitter() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = CholFactor::with_jitter(&a, 0.0, 1.0).unwrap();
        assert!(f.jitter() > 0.0);
        assert_eq!(CholFactor::with_jitter(&spd(3), 0.0, 1.0).unwrap().jitter(), 0.0);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            CholFactor::with_jitter(&a, 0.0, 1.0),
            Err(Error::Conditioning(_))
        ));
    }
}
