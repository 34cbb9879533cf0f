use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, TbfaError};

const MIN_PIVOT: f64 = 1e-300;

/// Cholesky factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CovFactorization {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CovFactorization {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(TbfaError::Dimension(format!(
                "covariance must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(TbfaError::Factorization("non-finite entry in covariance".into()));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            TbfaError::Factorization(format!(
                "matrix of order {} is not positive definite",
                matrix.nrows()
            ))
        })?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..matrix.nrows() {
            let p = l[(i, i)];
            if !(p > MIN_PIVOT) {
                return Err(TbfaError::Factorization(format!("pivot {i} is {p:e}")));
            }
            log_det += p.ln();
        }
        Ok(Self { matrix, chol, log_det: 2.0 * log_det })
    }

    /// Factorization of a diagonal matrix.
    pub fn diagonal(diag: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(diag))
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn lower_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Σ⁻¹ b.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// L⁻¹ b by forward substitution.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.l_dirty().solve_lower_triangular(b).expect("positive pivots")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// L b.
    pub fn mul_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.l() * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_log_det() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = CovFactorization::new(a.clone()).unwrap();
        let l = f.lower_factor();
        let err = (&l * l.transpose() - &a).norm() / a.norm();
        assert!(err < 1e-12);
        assert!((f.log_det() - a.determinant().ln()).abs() < 1e-12);
        assert!((0..3).all(|i| l[(i, i)] > 0.0));
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovFactorization::new(a), Err(TbfaError::Factorization(_))));
    }
}
