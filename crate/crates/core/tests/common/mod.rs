#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use tbfa::distributions::RngStream;
use tbfa::model::TbfaParams;

/// Multivariate t log-density of vec(X) with dense scale Σ_r ⊗ Σ_c.
pub fn mvt_oracle(x: &DMatrix<f64>, w: &DMatrix<f64>, sc: &DMatrix<f64>, sr: &DMatrix<f64>, nu: f64) -> f64 {
    let sigma = sr.kronecker(sc);
    let d = sigma.nrows() as f64;
    let e = DVector::from_column_slice((x - w).as_slice());
    let ch = sigma.cholesky().expect("positive definite");
    let log_det = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let q = e.dot(&ch.solve(&e));
    ln_gamma((nu + d) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * d * (nu * PI).ln() - 0.5 * log_det
        - 0.5 * (nu + d) * (1.0 + q / nu).ln()
}

/// Multivariate normal log-density of vec(X).
pub fn mvn_oracle(x: &DMatrix<f64>, w: &DMatrix<f64>, sc: &DMatrix<f64>, sr: &DMatrix<f64>) -> f64 {
    let sigma = sr.kronecker(sc);
    let d = sigma.nrows() as f64;
    let e = DVector::from_column_slice((x - w).as_slice());
    let ch = sigma.cholesky().expect("positive definite");
    let log_det = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * d * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * e.dot(&ch.solve(&e))
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut RngStream) -> DMatrix<f64> {
    tbfa::distributions::standard_normal_matrix(r, c, rng)
}

pub fn random_spd(d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let a = normal_matrix(d, d, rng);
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5
}

/// Random valid model with the given shape.
pub fn random_model(d_c: usize, d_r: usize, q_c: usize, q_r: usize, nu: Option<f64>, rng: &mut RngStream) -> TbfaParams {
    let psi = |d: usize, rng: &mut RngStream| DVector::from_fn(d, |_, _| rng.random_range(0.3..1.5));
    let p = TbfaParams {
        w: normal_matrix(d_c, d_r, rng),
        c: normal_matrix(d_c, q_c, rng),
        psi_c: psi(d_c, rng),
        r: normal_matrix(d_r, q_r, rng),
        psi_r: psi(d_r, rng),
        nu: nu.unwrap_or(f64::INFINITY),
        gaussian: nu.is_none(),
    };
    p.validate().expect("valid model");
    p
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
