//! Gamma, matrix-normal and matrix-variate t distributions.

mod factor;
mod rng;
pub mod special;

pub use factor::CovFactorization;
pub use rng::RngStream;
pub use special::{digamma, ln_gamma, trigamma};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Result, TbfaError};

/// Draw from Gamma(shape, rate).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(TbfaError::Domain(format!(
            "gamma requires positive shape and rate, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| TbfaError::Domain(e.to_string()))?;
    Ok(g.sample(rng))
}

/// rows × cols matrix of iid standard normals, drawn row by row.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

fn check_shapes(
    mean: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
) -> Result<()> {
    if mean.nrows() != col_cov.dim() || mean.ncols() != row_cov.dim() {
        return Err(TbfaError::Dimension(format!(
            "mean is {}x{} but covariances are {} and {}",
            mean.nrows(),
            mean.ncols(),
            col_cov.dim(),
            row_cov.dim()
        )));
    }
    Ok(())
}

/// mean + L_c E L_rᵀ with E standard normal.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_shapes(mean, col_cov, row_cov)?;
    let e = standard_normal_matrix(mean.nrows(), mean.ncols(), rng);
    Ok(mean + col_cov.mul_lower(&e) * row_cov.lower_factor().transpose())
}

/// Hierarchical draw: τ ~ Gamma(ν/2, ν/2), then X | τ matrix-normal with column covariance Σ_c/τ.
pub fn sample_mt<R: Rng + ?Sized>(
    w: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
    nu: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_shapes(w, col_cov, row_cov)?;
    let tau = sample_gamma(nu / 2.0, nu / 2.0, rng)?;
    let e = standard_normal_matrix(w.nrows(), w.ncols(), rng);
    let scale = 1.0 / tau.sqrt();
    Ok(w + col_cov.mul_lower(&e) * row_cov.lower_factor().transpose() * scale)
}

/// tr{Σ_c⁻¹(X−W)Σ_r⁻¹(X−W)ᵀ} through triangular solves.
pub fn mahalanobis(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
) -> Result<f64> {
    check_shapes(w, col_cov, row_cov)?;
    if x.shape() != w.shape() {
        return Err(TbfaError::Dimension(format!(
            "x is {:?} but w is {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let a = col_cov.solve_lower(&(x - w));
    let b = row_cov.solve_lower(&a.transpose());
    Ok(b.norm_squared())
}

/// Log-density of the matrix-variate t given the Mahalanobis distance.
pub fn mt_log_density_from_delta(delta: f64, d_c: usize, d_r: usize, log_det_c: f64, log_det_r: f64, nu: f64) -> f64 {
    let d = (d_c * d_r) as f64;
    ln_gamma((nu + d) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * d * (PI * nu).ln()
        - 0.5 * d_r as f64 * log_det_c
        - 0.5 * d_c as f64 * log_det_r
        - 0.5 * (nu + d) * (delta / nu).ln_1p()
}

/// Log-density of the matrix normal given the Mahalanobis distance.
pub fn mn_log_density_from_delta(delta: f64, d_c: usize, d_r: usize, log_det_c: f64, log_det_r: f64) -> f64 {
    let d = (d_c * d_r) as f64;
    -0.5 * d * (2.0 * PI).ln() - 0.5 * d_r as f64 * log_det_c - 0.5 * d_c as f64 * log_det_r - 0.5 * delta
}

pub fn mt_log_density(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
    nu: f64,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(TbfaError::Domain(format!("nu must be positive, got {nu}")));
    }
    let delta = mahalanobis(x, w, col_cov, row_cov)?;
    Ok(mt_log_density_from_delta(
        delta,
        w.nrows(),
        w.ncols(),
        col_cov.log_det(),
        row_cov.log_det(),
        nu,
    ))
}

pub fn mn_log_density(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    col_cov: &CovFactorization,
    row_cov: &CovFactorization,
) -> Result<f64> {
    let delta = mahalanobis(x, w, col_cov, row_cov)?;
    Ok(mn_log_density_from_delta(delta, w.nrows(), w.ncols(), col_cov.log_det(), row_cov.log_det()))
}
