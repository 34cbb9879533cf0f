use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, TbfaError};

/// One side of the separable covariance, Σ = ΛΛᵀ + Ψ, held in factor form.
///
/// Solves use the Woodbury identity so Σ itself is never formed.
#[derive(Debug, Clone)]
pub struct SideCov {
    loading: DMatrix<f64>,
    psi: DVector<f64>,
    inv_psi: DVector<f64>,
    m: DMatrix<f64>,
    m_chol: Option<Cholesky<f64, Dyn>>,
    log_det: f64,
}

impl SideCov {
    pub fn new(loading: DMatrix<f64>, psi: DVector<f64>) -> Result<Self> {
        let d = psi.len();
        if loading.nrows() != d {
            return Err(TbfaError::Dimension(format!(
                "loading has {} rows but psi has {d} entries",
                loading.nrows()
            )));
        }
        if psi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(TbfaError::CorruptParams("uniqueness must be positive and finite".into()));
        }
        if loading.iter().any(|v| !v.is_finite()) {
            return Err(TbfaError::CorruptParams("non-finite loading".into()));
        }
        let inv_psi = psi.map(|p| 1.0 / p);
        let q = loading.ncols();
        let scaled = DMatrix::from_fn(d, q, |i, j| loading[(i, j)] * inv_psi[i]);
        let mut m = loading.transpose() * &scaled;
        for i in 0..q {
            m[(i, i)] += 1.0;
        }
        crate::linalg::symmetrize(&mut m);
        let mut log_det: f64 = psi.iter().map(|p| p.ln()).sum();
        let m_chol = if q > 0 {
            let ch = Cholesky::new(m.clone())
                .ok_or_else(|| TbfaError::Factorization("M is not positive definite".into()))?;
            log_det += 2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            Some(ch)
        } else {
            None
        };
        Ok(Self { loading, psi, inv_psi, m, m_chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn factors(&self) -> usize {
        self.loading.ncols()
    }

    pub fn loading(&self) -> &DMatrix<f64> {
        &self.loading
    }

    pub fn psi(&self) -> &DVector<f64> {
        &self.psi
    }

    /// ΛᵀΨ⁻¹Λ + I.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// ln|Σ| = ln|M| + Σ ln ψ_i.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn m_inverse(&self) -> DMatrix<f64> {
        match &self.m_chol {
            Some(ch) => ch.inverse(),
            None => DMatrix::zeros(0, 0),
        }
    }

    pub fn m_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.m_chol {
            Some(ch) => ch.solve(b),
            None => b.clone(),
        }
    }

    /// Ψ⁻¹ Λ M⁻¹, the posterior projector of the latent factors.
    pub fn projector(&self) -> DMatrix<f64> {
        let q = self.factors();
        let d = self.dim();
        if q == 0 {
            return DMatrix::zeros(d, 0);
        }
        let scaled = DMatrix::from_fn(d, q, |i, j| self.loading[(i, j)] * self.inv_psi[i]);
        self.m_solve(&scaled.transpose()).transpose()
    }

    /// Dense Σ.
    pub fn sigma(&self) -> DMatrix<f64> {
        let mut s = &self.loading * self.loading.transpose();
        for i in 0..self.dim() {
            s[(i, i)] += self.psi[i];
        }
        s
    }

    /// Σ⁻¹ h for any number of columns.
    pub fn solve(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = h.clone();
        if self.factors() > 0 {
            // Σ⁻¹h = Ψ⁻¹(h − Λ M⁻¹ Λᵀ Ψ⁻¹ h)
            let mut scaled = h.clone();
            self.scale_rows(&mut scaled);
            let t = self.m_solve(&self.loading.tr_mul(&scaled));
            out.gemm(-1.0, &self.loading, &t, 1.0);
        }
        self.scale_rows(&mut out);
        out
    }

    fn scale_rows(&self, h: &mut DMatrix<f64>) {
        let d = self.dim();
        for j in 0..h.ncols() {
            let mut col = h.column_mut(j);
            for i in 0..d {
                col[i] *= self.inv_psi[i];
            }
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve(&DMatrix::identity(self.dim(), self.dim()))
    }
}
