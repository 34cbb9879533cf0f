use serde::{Deserialize, Serialize};

use crate::distributions::RngStream;
use crate::error::{Result, TbfaError};
use crate::estimation::{fit, Algorithm, FitConfig};
use crate::inference::{standard_errors, FreeSet, ParamLayout};
use crate::model::{identify_with, TbfaParams, TriangularForm};

use super::generate::{sample_from, truth, GeneratorKind, GeneratorSpec};
use super::metrics::sample_std;
use super::par::map_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyConfig {
    pub n_values: Vec<usize>,
    /// Repetitions per entry of `n_values`.
    pub reps: Vec<usize>,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub tol: f64,
    pub t_max: usize,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            n_values: vec![100, 500, 5000],
            reps: vec![100, 100, 25],
            seed: 0,
            algorithm: Algorithm::PxEcme,
            tol: 1e-8,
            t_max: 2000,
        }
    }
}

/// Per-parameter accuracy at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub n: usize,
    pub reps: usize,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub rmse: Vec<f64>,
    pub estd: Vec<f64>,
    /// Mean information-based standard error.
    pub imse: Vec<f64>,
    /// Repetitions whose fit failed.
    pub failures: usize,
}

impl AccuracyTable {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

const FORM: TriangularForm = TriangularForm::Reversed;

/// Fits the 5×5 accuracy model with its true dimensions at each sample size.
pub fn accuracy_study(cfg: &AccuracyConfig) -> Result<Vec<AccuracyTable>> {
    if cfg.n_values.len() != cfg.reps.len() {
        return Err(TbfaError::Config("n_values and reps differ in length".into()));
    }
    if cfg.reps.contains(&0) || cfg.n_values.contains(&0) {
        return Err(TbfaError::Config("sample sizes and reps must be positive".into()));
    }
    let master = RngStream::new(cfg.seed);
    let spec = GeneratorSpec::new(GeneratorKind::TbfaAccuracy, 0);
    let raw = truth(&spec, &mut master.split(u64::MAX))?;
    let true_p = identify_with(&raw, FORM).params;
    let free = FreeSet::Identified(FORM);
    let layout = ParamLayout::new(&true_p, free);
    let true_v = layout.values(&true_p);
    let mut tables = Vec::new();
    for (k, (&n, &reps)) in cfg.n_values.iter().zip(&cfg.reps).enumerate() {
        let block = master.split(k as u64);
        let runs: Vec<Option<(Vec<f64>, Vec<f64>)>> = map_indexed(reps, |rep| {
            let stream = block.split(rep as u64);
            one_rep(&true_p, n, cfg, &stream, &layout).ok()
        });
        let ok: Vec<&(Vec<f64>, Vec<f64>)> = runs.iter().flatten().collect();
        let np = layout.len();
        let mut rmse = vec![f64::NAN; np];
        let mut estd = vec![f64::NAN; np];
        let mut imse = vec![f64::NAN; np];
        if !ok.is_empty() {
            for j in 0..np {
                let est: Vec<f64> = ok.iter().map(|r| r.0[j]).collect();
                let ses: Vec<f64> = ok.iter().map(|r| r.1[j]).filter(|v| v.is_finite()).collect();
                rmse[j] = (est.iter().map(|e| (e - true_v[j]).powi(2)).sum::<f64>() / est.len() as f64).sqrt();
                estd[j] = sample_std(&est);
                if !ses.is_empty() {
                    imse[j] = ses.iter().sum::<f64>() / ses.len() as f64;
                }
            }
        }
        tables.push(AccuracyTable {
            n,
            reps,
            names: layout.names().to_vec(),
            truth: true_v.clone(),
            rmse,
            estd,
            imse,
            failures: reps - ok.len(),
        });
    }
    Ok(tables)
}

fn one_rep(
    true_p: &TbfaParams,
    n: usize,
    cfg: &AccuracyConfig,
    stream: &RngStream,
    layout: &ParamLayout,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let data = sample_from(true_p, n, &mut stream.split(0))?;
    let fc = FitConfig {
        algorithm: cfg.algorithm,
        tol: cfg.tol,
        t_max: cfg.t_max,
        seed: stream.split(1).seed(),
        form: FORM,
        ..FitConfig::default()
    };
    let r = fit(&data, true_p.q_c(), true_p.q_r(), &fc)?;
    let est = layout.values(&r.params);
    let se = match standard_errors(&r.params, n, FreeSet::Identified(FORM)) {
        Ok(s) => s.values,
        Err(_) => vec![f64::NAN; layout.len()],
    };
    Ok((est, se))
}
