use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TbfaError};
use crate::model::{TbfaParams, TriangularForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ecme,
    PxEcme,
    Aecm,
    PxAecm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ecme, Algorithm::PxEcme, Algorithm::Aecm, Algorithm::PxAecm];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ecme => "ecme",
            Algorithm::PxEcme => "px-ecme",
            Algorithm::Aecm => "aecm",
            Algorithm::PxAecm => "px-aecm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ecme" => Ok(Algorithm::Ecme),
            "px-ecme" | "pxecme" => Ok(Algorithm::PxEcme),
            "aecm" => Ok(Algorithm::Aecm),
            "px-aecm" | "pxaecm" => Ok(Algorithm::PxAecm),
            other => Err(TbfaError::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Starting point of a fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Random,
    Given(TbfaParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    /// Threshold on |1 − L_t / L_{t+1}|.
    pub tol: f64,
    pub t_max: usize,
    /// Floor on every uniqueness.
    pub eta: f64,
    pub nu_bounds: (f64, f64),
    pub gaussian: bool,
    pub init: Init,
    pub seed: u64,
    pub form: TriangularForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ecme,
            tol: 1e-8,
            t_max: 1000,
            eta: 0.005,
            nu_bounds: (0.5, 1e6),
            gaussian: false,
            init: Init::Random,
            seed: 0,
            form: TriangularForm::Lower,
        }
    }
}

impl FitConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(TbfaError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.t_max == 0 {
            return Err(TbfaError::Config("t_max must be at least 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(TbfaError::Config(format!("eta must be positive, got {}", self.eta)));
        }
        let (lo, hi) = self.nu_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(TbfaError::Config(format!("invalid nu bounds ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub algorithm: Algorithm,
    /// Identified parameters.
    pub params: TbfaParams,
    /// Log-likelihood at the start and after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Cumulative wall-clock seconds matching `loglik_trace`.
    pub time_trace: Vec<f64>,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub converged: bool,
    pub final_tau: Vec<f64>,
    pub nu_saturated: bool,
    /// A loading was rank deficient at identification.
    pub degenerate: bool,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }
}

/// Point inside an iteration at which a probe is invoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Mean (and, for AECM-type algorithms, ν) updated.
    First,
    /// Column-side covariance updated.
    Column,
    /// Row-side covariance updated.
    Row,
    /// ν updated by the ECME likelihood step.
    Nu,
}
