//! Browser bindings: simulate a dataset, fit it, and compare robust and
//! Gaussian fits under contamination. Every call returns JSON or MDS text.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tbfa::distributions::RngStream;
use tbfa::estimation::{fit, Algorithm, FitConfig};
use tbfa::io::{read_mds_text, write_mds_text};
use tbfa::model::ObsLabel;
use tbfa::selection::bic;
use tbfa::simbench::{
    generate, inject_outliers, quantile, rel_cov_error, GeneratorKind, GeneratorSpec, OutlierSpec,
};
use tbfa::TbfaError;

/// Largest dataset the page accepts, in matrix entries.
pub const MAX_ENTRIES: usize = 2_000_000;

/// Draws a dataset as MDS text. `nu <= 0` keeps the recipe's noise;
/// `contaminate` is empty or FAMILY:SITUATION:P.
pub fn simulate_mds(kind: &str, n: usize, seed: u64, nu: f64, contaminate: &str) -> Result<String, TbfaError> {
    let kind: GeneratorKind = kind.parse()?;
    let mut spec = GeneratorSpec::new(kind, n);
    if nu > 0.0 {
        spec = spec.with_nu(nu);
    }
    let master = RngStream::new(seed);
    let (mut data, truth) = generate(&spec, &mut master.split(0))?;
    if data.n() * data.d_c() * data.d_r() > MAX_ENTRIES {
        return Err(TbfaError::Config("dataset too large for the demo".into()));
    }
    if !contaminate.trim().is_empty() {
        let c: OutlierSpec = contaminate.trim().parse()?;
        data = inject_outliers(&data, &truth, &c, &mut master.split(1))?;
    }
    Ok(write_mds_text(&data))
}

#[derive(Serialize)]
struct FitSummary {
    converged: bool,
    iterations: usize,
    loglik: f64,
    bic: f64,
    nu: Option<f64>,
    loglik_trace: Vec<f64>,
    tau: Vec<f64>,
    psi_c: Vec<f64>,
    psi_r: Vec<f64>,
}

/// Fits MDS text with PX-ECME and summarizes the result as JSON.
pub fn fit_mds(text: &str, q_c: usize, q_r: usize, gaussian: bool, seed: u64) -> Result<String, TbfaError> {
    let data = read_mds_text(text)?;
    let cfg = FitConfig { algorithm: Algorithm::PxEcme, gaussian, seed, ..FitConfig::default() };
    let r = fit(&data, q_c, q_r, &cfg)?;
    let s = FitSummary {
        converged: r.converged,
        iterations: r.iterations,
        loglik: r.loglik(),
        bic: bic(&r, &data),
        nu: r.params.finite_nu(),
        loglik_trace: r.loglik_trace.clone(),
        tau: r.final_tau.clone(),
        psi_c: r.params.psi_c.iter().copied().collect(),
        psi_r: r.params.psi_r.iter().copied().collect(),
    };
    Ok(serde_json::to_string(&s).expect("plain data serializes"))
}

#[derive(Serialize)]
struct OutlierReport {
    n_clean: usize,
    n_outliers: usize,
    /// ‖Σ̂ − Σ‖_F / ‖Σ‖_F of the t fit.
    t_error: f64,
    gaussian_error: f64,
    mean_tau_outliers: f64,
    tau_clean_p10: f64,
    tau: Vec<f64>,
    outlier: Vec<bool>,
}

/// Contaminates Data1 draws with FC outliers and fits both models.
pub fn outlier_report(n: usize, p: f64, seed: u64) -> Result<String, TbfaError> {
    let master = RngStream::new(seed);
    let (clean, truth) = generate(&GeneratorSpec::new(GeneratorKind::BfaData1, n), &mut master.split(0))?;
    let spec: OutlierSpec = format!("FC:I:{p}").parse()?;
    let data = inject_outliers(&clean, &truth, &spec, &mut master.split(1))?;
    let cfg = FitConfig { algorithm: Algorithm::PxEcme, seed: master.split(2).seed(), ..FitConfig::default() };
    let t = fit(&data, 3, 3, &cfg)?;
    let g = fit(&data, 3, 3, &FitConfig { gaussian: true, ..cfg })?;
    let outlier: Vec<bool> = data.labels_or_clean().iter().map(|l| *l == ObsLabel::Outlier).collect();
    let pick = |want: bool| -> Vec<f64> {
        t.final_tau.iter().zip(&outlier).filter(|(_, &o)| o == want).map(|(t, _)| *t).collect()
    };
    let (tau_out, tau_clean) = (pick(true), pick(false));
    let mean_out = if tau_out.is_empty() { f64::NAN } else { tau_out.iter().sum::<f64>() / tau_out.len() as f64 };
    let rep = OutlierReport {
        n_clean: clean.n(),
        n_outliers: tau_out.len(),
        t_error: rel_cov_error(&truth, &t.params)?,
        gaussian_error: rel_cov_error(&truth, &g.params)?,
        mean_tau_outliers: mean_out,
        tau_clean_p10: quantile(&tau_clean, 0.1),
        tau: t.final_tau.clone(),
        outlier,
    };
    Ok(serde_json::to_string(&rep).expect("plain data serializes"))
}

fn js(r: Result<String, TbfaError>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate(kind: &str, n: usize, seed: u64, nu: f64, contaminate: &str) -> Result<String, JsValue> {
    js(simulate_mds(kind, n, seed, nu, contaminate))
}

#[wasm_bindgen(js_name = fitData)]
pub fn fit_data(text: &str, q_c: usize, q_r: usize, gaussian: bool, seed: u64) -> Result<String, JsValue> {
    js(fit_mds(text, q_c, q_r, gaussian, seed))
}

#[wasm_bindgen(js_name = outlierDemo)]
pub fn outlier_demo(n: usize, p: f64, seed: u64) -> Result<String, JsValue> {
    js(outlier_report(n, p, seed))
}
