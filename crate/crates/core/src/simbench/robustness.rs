use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::distributions::RngStream;
use crate::error::{Result, TbfaError};
use crate::estimation::{fit, Algorithm, FitConfig, FitResult};
use crate::model::{MatrixDataset, TbfaParams};

use super::generate::{generate, GeneratorKind, GeneratorSpec};
use super::metrics::rel_cov_error;
use super::outliers::{inject_outliers, OutlierFamily, OutlierSpec, Situation};
use super::par::map_indexed;

/// Competing estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Bilinear, t errors.
    Tbfa,
    /// Bilinear, Gaussian errors.
    Bfa,
    /// Vectorized, t errors.
    Tfa,
    /// Vectorized, Gaussian errors.
    Fa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tbfa, Method::Bfa, Method::Tfa, Method::Fa];

    pub fn is_gaussian(self) -> bool {
        matches!(self, Method::Bfa | Method::Fa)
    }

    pub fn is_vectorized(self) -> bool {
        matches!(self, Method::Tfa | Method::Fa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tbfa => "tBFA",
            Method::Bfa => "BFA",
            Method::Tfa => "tFA",
            Method::Fa => "FA",
        })
    }
}

impl FromStr for Method {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tbfa" => Ok(Method::Tbfa),
            "bfa" => Ok(Method::Bfa),
            "tfa" => Ok(Method::Tfa),
            "fa" => Ok(Method::Fa),
            other => Err(TbfaError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Fits `method` to bilinear data with the given factor dimensions.
pub fn fit_method(
    method: Method,
    data: &MatrixDataset,
    q_c: usize,
    q_r: usize,
    config: &FitConfig,
) -> Result<FitResult> {
    let cfg = FitConfig { gaussian: method.is_gaussian(), ..config.clone() };
    if method.is_vectorized() {
        fit(&data.vectorized(), q_c * q_r, 0, &cfg)
    } else {
        fit(data, q_c, q_r, &cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Clean observations per repetition.
    pub n: usize,
    pub proportions: Vec<f64>,
    pub families: Vec<OutlierFamily>,
    pub situations: Vec<Situation>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub tol: f64,
    pub t_max: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            proportions: vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.09],
            families: vec![OutlierFamily::Fc, OutlierFamily::Oc, OutlierFamily::FcOc],
            situations: vec![Situation::I, Situation::III],
            methods: Method::ALL.to_vec(),
            reps: 10,
            seed: 0,
            algorithm: Algorithm::PxEcme,
            tol: 1e-8,
            t_max: 1000,
        }
    }
}

/// One table cell averaged over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub family: OutlierFamily,
    pub situation: Situation,
    pub method: Method,
    pub p: f64,
    /// Mean relative covariance error over successful repetitions.
    pub rel_error: f64,
    pub rel_error_x100: f64,
    pub per_rep: Vec<f64>,
    pub failures: usize,
}

fn scenarios(cfg: &RobustnessConfig) -> Vec<(OutlierFamily, Situation, f64)> {
    let mut out = Vec::new();
    for &f in &cfg.families {
        for &s in &cfg.situations {
            for &p in &cfg.proportions {
                out.push((f, s, p));
            }
        }
    }
    out
}

/// Contaminates Data1 draws and records each method's covariance error.
pub fn robustness_study(cfg: &RobustnessConfig) -> Result<Vec<RobustnessCell>> {
    if cfg.reps == 0 {
        return Err(TbfaError::Config("reps must be positive".into()));
    }
    for &p in &cfg.proportions {
        OutlierSpec::new(OutlierFamily::Fc, Situation::I, p)?;
    }
    let scen = scenarios(cfg);
    let master = RngStream::new(cfg.seed);
    // errors[rep][scenario][method]
    let per_rep: Vec<Result<Vec<Vec<f64>>>> = map_indexed(cfg.reps, |rep| {
        let stream = master.split(rep as u64);
        let (clean, truth) =
            generate(&GeneratorSpec::new(GeneratorKind::BfaData1, cfg.n), &mut stream.split(0))?;
        scen.iter()
            .enumerate()
            .map(|(k, &(family, situation, p))| {
                let spec = OutlierSpec::new(family, situation, p)?;
                let data = inject_outliers(&clean, &truth, &spec, &mut stream.split(1 + k as u64))?;
                let fit_seed = stream.split(1_000_000 + k as u64).seed();
                Ok(cfg.methods.iter().map(|&m| method_error(m, &data, &truth, cfg, fit_seed)).collect())
            })
            .collect()
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (k, &(family, situation, p)) in scen.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let vals: Vec<f64> = per_rep.iter().map(|r| r[k][mi]).collect();
            let ok: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
            let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
            cells.push(RobustnessCell {
                family,
                situation,
                method,
                p,
                rel_error: mean,
                rel_error_x100: 100.0 * mean,
                failures: vals.len() - ok.len(),
                per_rep: vals,
            });
        }
    }
    Ok(cells)
}

fn method_error(method: Method, data: &MatrixDataset, truth: &TbfaParams, cfg: &RobustnessConfig, seed: u64) -> f64 {
    let fc = FitConfig { algorithm: cfg.algorithm, tol: cfg.tol, t_max: cfg.t_max, seed, ..FitConfig::default() };
    fit_method(method, data, truth.q_c(), truth.q_r(), &fc)
        .and_then(|r| rel_cov_error(truth, &r.params))
        .unwrap_or(f64::NAN)
}
