//! The tBFA parameter set, likelihood, identification and factor scores.

mod dataset;
mod identify;
mod params;
mod side;
mod varimax;

pub use dataset::{MatrixDataset, ObsLabel};
pub use identify::{identify, identify_with, Identified, TriangularForm};
pub use params::{derive, free_param_count, max_factors, DerivedState, TbfaParams};
pub use side::SideCov;
pub use varimax::{varimax, varimax_criterion};

use nalgebra::DMatrix;

use crate::distributions::{mn_log_density_from_delta, mt_log_density_from_delta};
use crate::error::{Result, TbfaError};
use crate::linalg::{block_dots, block_transpose, center_stack};

fn check_data(params: &TbfaParams, data: &MatrixDataset) -> Result<()> {
    if params.d_c() != data.d_c() || params.d_r() != data.d_r() {
        return Err(TbfaError::Dimension(format!(
            "parameters are {}x{} but data are {}x{}",
            params.d_c(),
            params.d_r(),
            data.d_c(),
            data.d_r()
        )));
    }
    Ok(())
}

/// Mahalanobis distances δ_n for a stacked residual matrix (d_c × N·d_r).
pub(crate) fn stacked_deltas(resid: &DMatrix<f64>, n: usize, col: &SideCov, row: &SideCov) -> Vec<f64> {
    let a = col.solve(resid);
    let b = block_transpose(&row.solve(&block_transpose(resid, n)), n);
    block_dots(&a, &b, row.dim())
}

/// δ_n = tr{Σ_c⁻¹(X_n−W)Σ_r⁻¹(X_n−W)ᵀ} for every observation.
pub fn mahalanobis_all(params: &TbfaParams, data: &MatrixDataset) -> Result<Vec<f64>> {
    params.validate()?;
    check_data(params, data)?;
    let col = params.col_side()?;
    let row = params.row_side()?;
    let resid = center_stack(&data.stack(), &params.w, data.n());
    Ok(stacked_deltas(&resid, data.n(), &col, &row))
}

/// Per-observation log-density given precomputed distances.
pub(crate) fn log_density_terms(
    nu: Option<f64>,
    (d_c, d_r): (usize, usize),
    deltas: &[f64],
    log_det_c: f64,
    log_det_r: f64,
) -> Vec<f64> {
    deltas
        .iter()
        .map(|&d| match nu {
            Some(nu) => mt_log_density_from_delta(d, d_c, d_r, log_det_c, log_det_r, nu),
            None => mn_log_density_from_delta(d, d_c, d_r, log_det_c, log_det_r),
        })
        .collect()
}

/// Observed-data log-likelihood with all constants retained.
pub fn log_likelihood(params: &TbfaParams, data: &MatrixDataset) -> Result<f64> {
    let deltas = mahalanobis_all(params, data)?;
    let col = params.col_side()?;
    let row = params.row_side()?;
    let shape = (params.d_c(), params.d_r());
    Ok(log_density_terms(params.finite_nu(), shape, &deltas, col.log_det(), row.log_det()).iter().sum())
}

/// E[τ | X_n] = (ν + d_c d_r)/(ν + δ_n); identically one in Gaussian mode.
pub fn tau_weights(params: &TbfaParams, data: &MatrixDataset) -> Result<Vec<f64>> {
    let deltas = mahalanobis_all(params, data)?;
    Ok(tau_from_deltas(params.finite_nu(), params.d_c() * params.d_r(), &deltas))
}

pub(crate) fn tau_from_deltas(nu: Option<f64>, d: usize, deltas: &[f64]) -> Vec<f64> {
    match nu {
        Some(nu) => deltas.iter().map(|&dl| (nu + d as f64) / (nu + dl)).collect(),
        None => vec![1.0; deltas.len()],
    }
}

/// E(Z | X) = M_c⁻¹CᵀΨ_c⁻¹(X−W)Ψ_r⁻¹R M_r⁻¹.
pub fn factor_scores(params: &TbfaParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    params.validate()?;
    if x.shape() != params.w.shape() {
        return Err(TbfaError::Dimension(format!(
            "observation is {:?}, parameters expect {:?}",
            x.shape(),
            params.w.shape()
        )));
    }
    let pc = params.col_side()?.projector();
    let pr = params.row_side()?.projector();
    Ok(pc.transpose() * (x - &params.w) * pr)
}
