use serde::{Deserialize, Serialize};

use crate::distributions::RngStream;
use crate::error::Result;
use crate::estimation::{fit, initialize, Algorithm, FitConfig, Init};

use super::generate::{generate, GeneratorKind, GeneratorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub spec: GeneratorSpec,
    pub algorithms: Vec<Algorithm>,
    pub q_c: usize,
    pub q_r: usize,
    pub seed: u64,
    pub tol: f64,
    pub t_max: usize,
}

impl ConvergenceConfig {
    /// Recipe defaults: true dimensions (3, 3) and all four algorithms.
    pub fn new(kind: GeneratorKind) -> Self {
        Self {
            spec: GeneratorSpec::new(kind, GeneratorSpec::default_n(kind)),
            algorithms: Algorithm::ALL.to_vec(),
            q_c: 3,
            q_r: 3,
            seed: 0,
            tol: if kind == GeneratorKind::BfaData3 { 1e-9 } else { 1e-8 },
            t_max: 1000,
        }
    }
}

/// Log-likelihood path of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub loglik: Vec<f64>,
    pub seconds: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub elapsed_seconds: f64,
}

/// Runs every algorithm from one shared random start on one draw.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<Vec<Trace>> {
    let master = RngStream::new(cfg.seed);
    let (data, _) = generate(&cfg.spec, &mut master.split(0))?;
    let base = FitConfig { tol: cfg.tol, t_max: cfg.t_max, ..FitConfig::default() };
    let init = initialize(&data, cfg.q_c, cfg.q_r, &base, &mut master.split(1))?;
    // sequential so the wall-clock traces are comparable
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let fc = FitConfig { algorithm, init: Init::Given(init.clone()), ..base.clone() };
            let r = fit(&data, cfg.q_c, cfg.q_r, &fc)?;
            Ok(Trace {
                algorithm,
                loglik: r.loglik_trace,
                seconds: r.time_trace,
                iterations: r.iterations,
                converged: r.converged,
                elapsed_seconds: r.elapsed_seconds,
            })
        })
        .collect()
}
