//! Individual conditional-maximization steps, exposed for testing and reuse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::distributions::special::{digamma_unchecked, ln_gamma};
use crate::error::{Result, TbfaError};
use crate::linalg::{block_transpose, center_stack, mul_bt, scale_blocks, symmetrize, weighted_block_mean};
use crate::model::{MatrixDataset, TbfaParams};

/// τ-weighted mean of the observations.
pub fn ecme_update_w(data: &MatrixDataset, tau: &[f64]) -> Result<DMatrix<f64>> {
    if tau.len() != data.n() {
        return Err(TbfaError::Dimension(format!("{} weights for {} observations", tau.len(), data.n())));
    }
    if tau.iter().any(|&t| !(t > 0.0)) {
        return Err(TbfaError::Domain("weights must be positive".into()));
    }
    Ok(weighted_block_mean(&data.stack(), tau, data.d_r()))
}

/// Σ_b τ_b B_b H_bᵀ over two stacks with blocks of width `q`.
pub(crate) fn weighted_scatter(b: &DMatrix<f64>, h: &DMatrix<f64>, tau: &[f64], q: usize) -> DMatrix<f64> {
    let mut s = mul_bt(&scale_blocks(b, tau, q), h);
    symmetrize(&mut s);
    s
}

/// S_c = (1/(N d_r)) Σ τ_n (X_n−W) Σ_r⁻¹ (X_n−W)ᵀ.
pub fn robust_col_cov(data: &MatrixDataset, params: &TbfaParams, tau: &[f64]) -> Result<DMatrix<f64>> {
    params.validate()?;
    if tau.len() != data.n() || data.d_c() != params.d_c() || data.d_r() != params.d_r() {
        return Err(TbfaError::Dimension("data, parameters and weights disagree".into()));
    }
    let n = data.n();
    let hc = center_stack(&data.stack(), &params.w, n);
    let bc = block_transpose(&params.row_side()?.solve(&block_transpose(&hc, n)), n);
    Ok(weighted_scatter(&bc, &hc, tau, data.d_r()) / (n * data.d_r()) as f64)
}

/// S_r = (1/(N d_c)) Σ τ_n (X_n−W)ᵀ Σ_c⁻¹ (X_n−W).
pub fn robust_row_cov(data: &MatrixDataset, params: &TbfaParams, tau: &[f64]) -> Result<DMatrix<f64>> {
    robust_col_cov(&data.transposed(), &params.transposed(), tau)
}

/// Loading maximizing the factor-analysis objective for fixed Ψ.
///
/// Returns the loading (zero beyond the retained columns) and the number of
/// eigenvalues of Ψ^{-1/2} S Ψ^{-1/2} that are at least one.
pub fn update_loadings_eigen(s: &DMatrix<f64>, psi: &DVector<f64>, q: usize) -> (DMatrix<f64>, usize) {
    let d = psi.len();
    let mut loading = DMatrix::zeros(d, q);
    if q == 0 {
        return (loading, 0);
    }
    let sq = psi.map(f64::sqrt);
    let mut sn = DMatrix::from_fn(d, d, |i, j| s[(i, j)] / (sq[i] * sq[j]));
    symmetrize(&mut sn);
    let eig = SymmetricEigen::new(sn);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut kept = 0;
    for (k, &idx) in order.iter().take(q).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda < 1.0 {
            break;
        }
        let f = (lambda - 1.0).sqrt();
        let u = eig.eigenvectors.column(idx);
        for i in 0..d {
            loading[(i, k)] = sq[i] * u[i] * f;
        }
        kept += 1;
    }
    (loading, kept)
}

/// One ascending sweep of coordinate-wise uniqueness updates for fixed loading.
pub fn update_psi_sequential(
    s: &DMatrix<f64>,
    loading: &DMatrix<f64>,
    psi_old: &DVector<f64>,
    eta: f64,
) -> DVector<f64> {
    let d = psi_old.len();
    let q = loading.ncols();
    let isq = psi_old.map(|p| 1.0 / p.sqrt());
    let sn = DMatrix::from_fn(d, d, |i, j| s[(i, j)] * isq[i] * isq[j]);
    // B⁻¹ = (I + C*C*ᵀ)⁻¹ = I − C*(I + C*ᵀC*)⁻¹C*ᵀ
    let mut binv = DMatrix::identity(d, d);
    if q > 0 {
        let cs = DMatrix::from_fn(d, q, |i, j| loading[(i, j)] * isq[i]);
        let mut inner = cs.tr_mul(&cs);
        for k in 0..q {
            inner[(k, k)] += 1.0;
        }
        let t = inner
            .cholesky()
            .map(|ch| ch.solve(&cs.transpose()))
            .unwrap_or_else(|| DMatrix::zeros(q, d));
        binv.gemm(-1.0, &cs, &t, 1.0);
    }
    let mut out = psi_old.clone();
    let mut sb = DVector::zeros(d);
    for i in 0..d {
        let b = binv.column(i).clone_owned();
        let bii = b[i];
        sb.gemv(1.0, &sn, &b, 0.0);
        let bsb = b.dot(&sb);
        let omega = (bsb - bii) / (bii * bii);
        let psi_new = ((1.0 + omega) * psi_old[i]).max(eta);
        out[i] = psi_new;
        let omega = psi_new / psi_old[i] - 1.0;
        let denom = 1.0 + omega * bii;
        if omega != 0.0 {
            binv.ger(-omega / denom, &b, &b, 1.0);
        }
    }
    out
}

/// Outcome of a one-dimensional ν solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSolution {
    pub nu: f64,
    /// The equation had no sign change on the bracket; `nu` is a bound.
    pub saturated: bool,
    pub iterations: usize,
}

const NU_REL_WIDTH: f64 = 1e-12;
const NU_MAX_BISECT: usize = 200;

/// Bisection in log ν for a function that is positive left of its root.
fn bisect_decreasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, usize) {
    let (mut lo, mut hi) = (lo, hi);
    let mut it = 0;
    while it < NU_MAX_BISECT && hi - lo > NU_REL_WIDTH * lo {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    (if flo <= fhi { lo } else { hi }, it)
}

fn check_bounds(bounds: (f64, f64)) -> Result<()> {
    if !(bounds.0 > 0.0 && bounds.0 < bounds.1 && bounds.1.is_finite()) {
        return Err(TbfaError::Config(format!("invalid nu bounds {bounds:?}")));
    }
    Ok(())
}

/// Derivative of the observed log-likelihood in ν (scaled by 2/N).
pub fn ecme_nu_equation(nu: f64, deltas: &[f64], d: usize) -> f64 {
    let dd = d as f64;
    let mean: f64 = deltas
        .iter()
        .map(|&dl| {
            let t = (nu + dd) / (nu + dl);
            t.ln() - t
        })
        .sum::<f64>()
        / deltas.len() as f64;
    -digamma_unchecked(nu / 2.0) + (nu / 2.0).ln() + 1.0 + digamma_unchecked((nu + dd) / 2.0)
        - ((nu + dd) / 2.0).ln()
        + mean
}

/// ν-dependent part of the observed log-likelihood.
pub fn nu_profile_loglik(nu: f64, deltas: &[f64], d: usize) -> f64 {
    let dd = d as f64;
    let n = deltas.len() as f64;
    n * (ln_gamma((nu + dd) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * dd * nu.ln())
        - 0.5 * (nu + dd) * deltas.iter().map(|&dl| (dl / nu).ln_1p()).sum::<f64>()
}

/// Maximizes the observed likelihood in ν given the current distances.
pub fn solve_nu_ecme(deltas: &[f64], d: usize, bounds: (f64, f64)) -> Result<NuSolution> {
    check_bounds(bounds)?;
    if deltas.is_empty() {
        return Err(TbfaError::EmptyData);
    }
    let f = |nu: f64| ecme_nu_equation(nu, deltas, d);
    let (flo, fhi) = (f(bounds.0), f(bounds.1));
    if flo > 0.0 && fhi < 0.0 {
        let (nu, iterations) = bisect_decreasing(f, bounds.0, bounds.1);
        return Ok(NuSolution { nu, saturated: false, iterations });
    }
    let llo = nu_profile_loglik(bounds.0, deltas, d);
    let lhi = nu_profile_loglik(bounds.1, deltas, d);
    let nu = if lhi >= llo { bounds.1 } else { bounds.0 };
    Ok(NuSolution { nu, saturated: true, iterations: 0 })
}

/// Solves −ψ(ν/2) + ln(ν/2) + 1 + c = 0, the complete-data ν equation.
pub fn solve_nu_em(c: f64, bounds: (f64, f64)) -> Result<NuSolution> {
    check_bounds(bounds)?;
    let f = |nu: f64| -digamma_unchecked(nu / 2.0) + (nu / 2.0).ln() + 1.0 + c;
    if f(bounds.1) >= 0.0 {
        return Ok(NuSolution { nu: bounds.1, saturated: true, iterations: 0 });
    }
    if f(bounds.0) <= 0.0 {
        return Ok(NuSolution { nu: bounds.0, saturated: true, iterations: 0 });
    }
    let (nu, iterations) = bisect_decreasing(f, bounds.0, bounds.1);
    Ok(NuSolution { nu, saturated: false, iterations })
}

/// Constant of the AECM ν equation: ψ((ν+D)/2) − ln((ν+D)/2) + mean(ln τ − τ).
pub fn aecm_nu_constant(nu_old: f64, d: usize, tau: &[f64]) -> f64 {
    let a = (nu_old + d as f64) / 2.0;
    digamma_unchecked(a) - a.ln() + tau.iter().map(|t| t.ln() - t).sum::<f64>() / tau.len() as f64
}

/// Constant of the expanded-model ν equation, with α̃ = mean τ.
pub fn px_nu_constant(nu_old: f64, d: usize, deltas: &[f64], alpha: f64) -> f64 {
    let dd = d as f64;
    let psi = digamma_unchecked((nu_old + dd) / 2.0);
    let e_ln_tau = deltas.iter().map(|&dl| psi - ((nu_old + dl) / 2.0).ln()).sum::<f64>() / deltas.len() as f64;
    -alpha.ln() + e_ln_tau - 1.0
}
