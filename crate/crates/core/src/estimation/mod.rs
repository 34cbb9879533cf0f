//! Maximum-likelihood fitting: ECME, AECM and their parameter-expanded variants.

mod config;
mod engine;
pub mod steps;

pub use config::{Algorithm, FitConfig, FitResult, Init, Stage};
pub use steps::{
    ecme_update_w, robust_col_cov, robust_row_cov, solve_nu_ecme, update_loadings_eigen,
    update_psi_sequential, NuSolution,
};

use nalgebra::{DMatrix, DVector};

use crate::distributions::{standard_normal_matrix, RngStream};
use crate::error::{Result, TbfaError};
use crate::linalg::{block_transpose, center_stack, weighted_block_mean};
use crate::model::{identify_with, max_factors, tau_from_deltas, MatrixDataset, TbfaParams};
use engine::Engine;

/// Wall clock; reads zero where the platform has none.
struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    t0: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            t0: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> std::time::Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.t0.elapsed();
        #[cfg(target_arch = "wasm32")]
        std::time::Duration::ZERO
    }
}

fn check_dims(data: &MatrixDataset, q_c: usize, q_r: usize) -> Result<()> {
    for (name, q, d) in [("q_c", q_c, data.d_c()), ("q_r", q_r, data.d_r())] {
        let max = max_factors(d);
        if q > max {
            return Err(TbfaError::Dimension(format!(
                "{name} = {q} exceeds max_factors({d}) = {max}"
            )));
        }
    }
    Ok(())
}

/// Random start: sample mean, half of the sample variance in the uniquenesses
/// and random orthonormal loadings.
pub fn initialize(
    data: &MatrixDataset,
    q_c: usize,
    q_r: usize,
    config: &FitConfig,
    rng: &mut RngStream,
) -> Result<TbfaParams> {
    if data.n() == 0 {
        return Err(TbfaError::EmptyData);
    }
    check_dims(data, q_c, q_r)?;
    let (n, d_c, d_r) = (data.n(), data.d_c(), data.d_r());
    let x = data.stack();
    let w = weighted_block_mean(&x, &vec![1.0; n], d_r);
    let hc = center_stack(&x, &w, n);
    let hr = block_transpose(&hc, n);
    let v_c = DVector::from_fn(d_c, |i, _| hc.row(i).norm_squared() / (n * d_r) as f64);
    let v_r = DVector::from_fn(d_r, |j, _| hr.row(j).norm_squared() / (n * d_c) as f64);
    let g = v_c.mean();
    // Σ_c,ii Σ_r,jj ≈ v_c,i v_r,j / g matches the marginal variances of a separable model
    let root = g.sqrt();
    let split = |v: &DVector<f64>| v.map(|s| if root > 0.0 { (0.5 * s / root).max(config.eta) } else { config.eta });
    let psi_c = split(&v_c);
    let psi_r = split(&v_r);
    let mut loading = |d: usize, q: usize| -> DMatrix<f64> {
        if q == 0 || root == 0.0 {
            return DMatrix::zeros(d, q);
        }
        let z = standard_normal_matrix(d, q, rng);
        let u = z.qr().q();
        u * (0.5 * root * d as f64 / q as f64).sqrt()
    };
    let c = loading(d_c, q_c);
    let r = loading(d_r, q_r);
    let p = TbfaParams {
        w,
        c,
        psi_c,
        r,
        psi_r,
        nu: if config.gaussian { f64::INFINITY } else { 10.0 },
        gaussian: config.gaussian,
    };
    p.validate()?;
    Ok(p)
}

fn starting_point(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<TbfaParams> {
    match &config.init {
        config::Init::Random => initialize(data, q_c, q_r, config, &mut RngStream::new(config.seed)),
        config::Init::Given(p) => {
            if p.d_c() != data.d_c() || p.d_r() != data.d_r() || p.q_c() != q_c || p.q_r() != q_r {
                return Err(TbfaError::Config("initial parameters do not match the requested shape".into()));
            }
            let mut p = p.clone();
            p.gaussian = config.gaussian;
            if config.gaussian {
                p.nu = f64::INFINITY;
            } else if !p.nu.is_finite() {
                p.nu = 10.0;
            }
            p.validate()?;
            Ok(p)
        }
    }
}

/// Runs the configured algorithm, calling `probe` after every conditional step.
pub fn fit_with_probe(
    data: &MatrixDataset,
    q_c: usize,
    q_r: usize,
    config: &FitConfig,
    mut probe: Option<&mut dyn FnMut(Stage, &TbfaParams)>,
) -> Result<FitResult> {
    config.validate()?;
    if data.n() == 0 {
        return Err(TbfaError::EmptyData);
    }
    check_dims(data, q_c, q_r)?;
    let start = Clock::start();
    let init = starting_point(data, q_c, q_r, config)?;
    let engine = Engine::new(data, config);
    let mut st = engine.start(&init)?;
    if !st.loglik.is_finite() {
        return Err(TbfaError::Divergence { iteration: 0 });
    }
    let mut loglik_trace = vec![st.loglik];
    let mut time_trace = vec![start.elapsed().as_secs_f64()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.t_max {
        let prev = st.loglik;
        engine.iterate(&mut st, &mut probe)?;
        iterations += 1;
        if !st.loglik.is_finite() {
            return Err(TbfaError::Divergence { iteration: iterations });
        }
        loglik_trace.push(st.loglik);
        time_trace.push(start.elapsed().as_secs_f64());
        if (1.0 - prev / st.loglik).abs() < config.tol {
            converged = true;
            break;
        }
    }
    let raw = st.params(config.gaussian);
    let final_tau = tau_from_deltas(raw.finite_nu(), data.d_c() * data.d_r(), &st.deltas);
    let id = identify_with(&raw, config.form);
    Ok(FitResult {
        algorithm: config.algorithm,
        params: id.params,
        loglik_trace,
        time_trace,
        iterations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        converged,
        final_tau,
        nu_saturated: st.saturated,
        degenerate: id.degenerate,
    })
}

/// Fits with the algorithm named in `config`.
pub fn fit(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<FitResult> {
    fit_with_probe(data, q_c, q_r, config, None)
}

fn fit_as(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig, algorithm: Algorithm) -> Result<FitResult> {
    let cfg = FitConfig { algorithm, ..config.clone() };
    fit(data, q_c, q_r, &cfg)
}

pub fn fit_ecme(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<FitResult> {
    fit_as(data, q_c, q_r, config, Algorithm::Ecme)
}

pub fn fit_px_ecme(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<FitResult> {
    fit_as(data, q_c, q_r, config, Algorithm::PxEcme)
}

pub fn fit_aecm(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<FitResult> {
    fit_as(data, q_c, q_r, config, Algorithm::Aecm)
}

pub fn fit_px_aecm(data: &MatrixDataset, q_c: usize, q_r: usize, config: &FitConfig) -> Result<FitResult> {
    fit_as(data, q_c, q_r, config, Algorithm::PxAecm)
}

/// Best of `restarts` random starts (seeds `config.seed`, `config.seed + 1`, …).
pub fn fit_best_of(
    data: &MatrixDataset,
    q_c: usize,
    q_r: usize,
    config: &FitConfig,
    restarts: usize,
) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for k in 0..restarts.max(1) {
        let cfg = FitConfig { seed: config.seed.wrapping_add(k as u64), init: config::Init::Random, ..config.clone() };
        match fit(data, q_c, q_r, &cfg) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.loglik() > b.loglik()) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(TbfaError::EmptyData))
}
