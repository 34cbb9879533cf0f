use nalgebra::{DMatrix, DVector};

use super::side::SideCov;
use crate::distributions::CovFactorization;
use crate::error::{Result, TbfaError};

/// Θ = {W, C, Ψ_c, R, Ψ_r, ν}.
///
/// With `gaussian` set, ν is treated as +∞ and the model is plain bilinear
/// factor analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TbfaParams {
    pub w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub psi_c: DVector<f64>,
    pub r: DMatrix<f64>,
    pub psi_r: DVector<f64>,
    pub nu: f64,
    pub gaussian: bool,
}

/// Largest factor count on a side of dimension `d`.
pub fn max_factors(d: usize) -> usize {
    let d = d as f64;
    (d + (1.0 - (1.0 + 8.0 * d).sqrt()) / 2.0 + 1e-9).floor().max(0.0) as usize
}

/// Free parameters of the t model (subtract one for the Gaussian model).
pub fn free_param_count(d_c: usize, d_r: usize, q_c: usize, q_r: usize) -> usize {
    let side = |d: usize, q: usize| d * (q + 1) - q * q.saturating_sub(1) / 2;
    side(d_c, q_c) + side(d_r, q_r) + d_c * d_r + 1
}

impl TbfaParams {
    pub fn new(
        w: DMatrix<f64>,
        c: DMatrix<f64>,
        psi_c: DVector<f64>,
        r: DMatrix<f64>,
        psi_r: DVector<f64>,
        nu: f64,
    ) -> Result<Self> {
        let p = Self { w, c, psi_c, r, psi_r, nu, gaussian: false };
        p.validate()?;
        Ok(p)
    }

    pub fn new_gaussian(
        w: DMatrix<f64>,
        c: DMatrix<f64>,
        psi_c: DVector<f64>,
        r: DMatrix<f64>,
        psi_r: DVector<f64>,
    ) -> Result<Self> {
        let p = Self { w, c, psi_c, r, psi_r, nu: f64::INFINITY, gaussian: true };
        p.validate()?;
        Ok(p)
    }

    pub fn d_c(&self) -> usize {
        self.w.nrows()
    }
    pub fn d_r(&self) -> usize {
        self.w.ncols()
    }
    pub fn q_c(&self) -> usize {
        self.c.ncols()
    }
    pub fn q_r(&self) -> usize {
        self.r.ncols()
    }

    /// Shape, positivity and factor-count checks.
    pub fn validate(&self) -> Result<()> {
        let (d_c, d_r) = self.w.shape();
        if self.c.nrows() != d_c || self.psi_c.len() != d_c {
            return Err(TbfaError::Dimension(format!(
                "column side: W has {d_c} rows, C has {}, psi_c has {}",
                self.c.nrows(),
                self.psi_c.len()
            )));
        }
        if self.r.nrows() != d_r || self.psi_r.len() != d_r {
            return Err(TbfaError::Dimension(format!(
                "row side: W has {d_r} columns, R has {} rows, psi_r has {}",
                self.r.nrows(),
                self.psi_r.len()
            )));
        }
        check_factor_count("q_c", self.q_c(), d_c)?;
        check_factor_count("q_r", self.q_r(), d_r)?;
        if self.psi_c.iter().chain(self.psi_r.iter()).any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(TbfaError::CorruptParams("uniquenesses must be positive".into()));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.w) || !finite(&self.c) || !finite(&self.r) {
            return Err(TbfaError::CorruptParams("non-finite mean or loading".into()));
        }
        if !self.gaussian && !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(TbfaError::Domain(format!("nu must be positive and finite, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn free_param_count(&self) -> usize {
        free_param_count(self.d_c(), self.d_r(), self.q_c(), self.q_r()) - usize::from(self.gaussian)
    }

    pub fn col_side(&self) -> Result<SideCov> {
        SideCov::new(self.c.clone(), self.psi_c.clone())
    }

    pub fn row_side(&self) -> Result<SideCov> {
        SideCov::new(self.r.clone(), self.psi_r.clone())
    }

    pub fn sigma_c(&self) -> DMatrix<f64> {
        dense_sigma(&self.c, &self.psi_c)
    }

    pub fn sigma_r(&self) -> DMatrix<f64> {
        dense_sigma(&self.r, &self.psi_r)
    }

    /// Parameters of the transposed problem (X ↦ Xᵀ swaps the two sides).
    pub fn transposed(&self) -> TbfaParams {
        TbfaParams {
            w: self.w.transpose(),
            c: self.r.clone(),
            psi_c: self.psi_r.clone(),
            r: self.c.clone(),
            psi_r: self.psi_c.clone(),
            nu: self.nu,
            gaussian: self.gaussian,
        }
    }

    /// ν as a finite number for formulas that need one; `None` in Gaussian mode.
    pub fn finite_nu(&self) -> Option<f64> {
        (!self.gaussian).then_some(self.nu)
    }
}

fn check_factor_count(name: &str, q: usize, d: usize) -> Result<()> {
    let max = max_factors(d);
    if q > max {
        return Err(TbfaError::Dimension(format!(
            "{name} = {q} exceeds max_factors({d}) = {max}"
        )));
    }
    Ok(())
}

pub(crate) fn dense_sigma(loading: &DMatrix<f64>, psi: &DVector<f64>) -> DMatrix<f64> {
    let mut s = loading * loading.transpose();
    for i in 0..psi.len() {
        s[(i, i)] += psi[i];
    }
    s
}

/// Cached covariance factorizations for a parameter set.
#[derive(Debug, Clone)]
pub struct DerivedState {
    pub sigma_c: CovFactorization,
    pub sigma_r: CovFactorization,
    pub col: SideCov,
    pub row: SideCov,
}

impl DerivedState {
    pub fn m_c(&self) -> &DMatrix<f64> {
        self.col.m()
    }
    pub fn m_r(&self) -> &DMatrix<f64> {
        self.row.m()
    }
}

pub fn derive(params: &TbfaParams) -> Result<DerivedState> {
    params.validate()?;
    let col = params.col_side()?;
    let row = params.row_side()?;
    let sigma_c = CovFactorization::new(col.sigma())
        .map_err(|e| TbfaError::CorruptParams(format!("Sigma_c: {e}")))?;
    let sigma_r = CovFactorization::new(row.sigma())
        .map_err(|e| TbfaError::CorruptParams(format!("Sigma_r: {e}")))?;
    Ok(DerivedState { sigma_c, sigma_r, col, row })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_limits() {
        assert_eq!(max_factors(10), 6);
        assert_eq!(max_factors(8), 4);
        assert_eq!(max_factors(1), 0);
        assert_eq!(max_factors(3), 1);
        assert_eq!(max_factors(6), 3);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(free_param_count(10, 10, 3, 3), 175);
        assert_eq!(free_param_count(2, 2, 1, 1), 13);
    }

    #[test]
    fn derive_zero_loading() {
        let p = TbfaParams::new(
            DMatrix::zeros(3, 2),
            DMatrix::zeros(3, 1),
            DVector::from_element(3, 1.0),
            DMatrix::zeros(2, 0),
            DVector::from_element(2, 1.0),
            4.0,
        )
        .unwrap();
        let d = derive(&p).unwrap();
        assert_eq!(d.sigma_c.matrix(), &DMatrix::identity(3, 3));
        assert_eq!(d.m_c(), &DMatrix::identity(1, 1));
    }

    #[test]
    fn rank_one_m() {
        let c = DMatrix::from_column_slice(3, 1, &[1.5, -0.5, 0.0]);
        let p = TbfaParams::new(
            DMatrix::zeros(3, 2),
            c,
            DVector::from_element(3, 0.5),
            DMatrix::zeros(2, 0),
            DVector::from_element(2, 1.0),
            4.0,
        )
        .unwrap();
        let d = derive(&p).unwrap();
        assert!((d.m_c()[(0, 0)] - (1.0 + (2.25 + 0.25) / 0.5)).abs() < 1e-14);
    }

    #[test]
    fn rejects_too_many_factors() {
        let r = TbfaParams::new(
            DMatrix::zeros(10, 2),
            DMatrix::zeros(10, 7),
            DVector::from_element(10, 1.0),
            DMatrix::zeros(2, 0),
            DVector::from_element(2, 1.0),
            4.0,
        );
        assert!(matches!(r, Err(TbfaError::Dimension(_))));
    }
}
