use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::distributions::{sample_matrix_normal, sample_mt, standard_normal_matrix, CovFactorization, RngStream};
use crate::error::{Result, TbfaError};
use crate::model::{MatrixDataset, TbfaParams};

/// Named simulation recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// 10×10, q = (3, 3), ordinary noise.
    BfaData1,
    /// As Data1 with low noise.
    BfaData2,
    /// d_c = 2000, d_r = 10, N = 100.
    BfaData3,
    /// 5×5, q = (2, 2), ν = 3.
    TbfaAccuracy,
}

impl FromStr for GeneratorKind {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "data1" | "bfa_data1" => Ok(Self::BfaData1),
            "data2" | "bfa_data2" => Ok(Self::BfaData2),
            "data3" | "bfa_data3" => Ok(Self::BfaData3),
            "accuracy" | "tbfa_accuracy" => Ok(Self::TbfaAccuracy),
            other => Err(TbfaError::Config(format!("unknown generator kind '{other}'"))),
        }
    }
}

/// Substitutions applied on top of a named recipe.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    /// Draw from the t model with this ν instead of the recipe's default.
    pub nu: Option<f64>,
    pub d_c: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub overrides: Overrides,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        Self { kind, n, overrides: Overrides::default() }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.overrides.nu = Some(nu);
        self
    }

    pub fn with_d_c(mut self, d_c: usize) -> Self {
        self.overrides.d_c = Some(d_c);
        self
    }

    /// Recipe default sample size.
    pub fn default_n(kind: GeneratorKind) -> usize {
        match kind {
            GeneratorKind::BfaData1 | GeneratorKind::BfaData2 => 500,
            GeneratorKind::BfaData3 => 100,
            GeneratorKind::TbfaAccuracy => 500,
        }
    }
}

/// n evenly spaced points from a to b.
pub fn linspace(a: f64, b: f64, n: usize) -> DVector<f64> {
    if n == 1 {
        return DVector::from_element(1, a);
    }
    DVector::from_fn(n, |i, _| a + (b - a) * i as f64 / (n - 1) as f64)
}

/// Random d×q matrix with orthonormal columns.
pub fn random_orthonormal(d: usize, q: usize, rng: &mut RngStream) -> DMatrix<f64> {
    if q == 0 {
        return DMatrix::zeros(d, 0);
    }
    let qr = standard_normal_matrix(d, q, rng).qr();
    let (qm, r) = (qr.q(), qr.r());
    // fix column signs so the draw is Haar distributed
    let mut out = qm;
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            out.column_mut(j).neg_mut();
        }
    }
    out
}

/// Ground-truth parameters of a recipe.
pub fn truth(spec: &GeneratorSpec, rng: &mut RngStream) -> Result<TbfaParams> {
    let nu = spec.overrides.nu;
    let p = match spec.kind {
        GeneratorKind::BfaData1 | GeneratorKind::BfaData2 | GeneratorKind::BfaData3 => {
            let default_dc = if spec.kind == GeneratorKind::BfaData3 { 2000 } else { 10 };
            let d_c = spec.overrides.d_c.unwrap_or(default_dc);
            let d_r = 10;
            let lc = DMatrix::from_diagonal(&DVector::from_vec(vec![5f64.sqrt(), 4.5f64.sqrt(), 2.0]));
            let lr = DMatrix::from_diagonal(&DVector::from_vec(vec![10f64.sqrt(), 3.0, 8f64.sqrt()]));
            let c = random_orthonormal(d_c, 3, rng) * lc;
            let r = random_orthonormal(d_r, 3, rng) * lr;
            let (psi_c, psi_r) = if spec.kind == GeneratorKind::BfaData2 {
                (linspace(0.05, 0.1, d_c), linspace(0.1, 0.2, d_r))
            } else {
                (linspace(0.5, 1.0, d_c), linspace(1.0, 2.0, d_r))
            };
            TbfaParams {
                w: DMatrix::zeros(d_c, d_r),
                c,
                psi_c,
                r,
                psi_r,
                nu: nu.unwrap_or(f64::INFINITY),
                gaussian: nu.is_none(),
            }
        }
        GeneratorKind::TbfaAccuracy => {
            if spec.overrides.d_c.is_some() {
                return Err(TbfaError::Config("the accuracy recipe has fixed dimensions".into()));
            }
            let ct = DMatrix::from_row_slice(
                2,
                5,
                &[-1.03, -0.78, -1.35, -1.05, -2.10, 3.47, -4.39, 6.99, -3.44, -2.83],
            );
            let rt = DMatrix::from_row_slice(
                2,
                5,
                &[-1.12, -1.40, -1.45, -1.54, -1.15, -2.15, -5.44, -4.71, 6.28, 2.04],
            );
            TbfaParams {
                w: DMatrix::zeros(5, 5),
                c: ct.transpose(),
                psi_c: DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5]),
                r: rt.transpose(),
                psi_r: DVector::from_vec(vec![0.2, 0.3, 0.4, 0.5, 0.6]),
                nu: nu.unwrap_or(3.0),
                gaussian: false,
            }
        }
    };
    p.validate()?;
    Ok(p)
}

/// Draws `n` observations from the model given by `params`.
pub fn sample_from(params: &TbfaParams, n: usize, rng: &mut RngStream) -> Result<MatrixDataset> {
    let sc = CovFactorization::new(params.sigma_c())?;
    let sr = CovFactorization::new(params.sigma_r())?;
    let obs = (0..n)
        .map(|_| match params.finite_nu() {
            Some(nu) => sample_mt(&params.w, &sc, &sr, nu, rng),
            None => sample_matrix_normal(&params.w, &sc, &sr, rng),
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixDataset::with_shape(params.d_c(), params.d_r(), obs)
}

/// Ground truth plus a dataset drawn from it.
pub fn generate(spec: &GeneratorSpec, rng: &mut RngStream) -> Result<(MatrixDataset, TbfaParams)> {
    let params = truth(spec, rng)?;
    let data = sample_from(&params, spec.n, rng)?;
    Ok((data, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data1_spectrum() {
        let mut rng = RngStream::new(3);
        let p = truth(&GeneratorSpec::new(GeneratorKind::BfaData1, 10), &mut rng).unwrap();
        let mut ev: Vec<f64> = p.sigma_c().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!(ev[..3].iter().all(|&v| v > 4.0));
        assert!(ev[3..].iter().all(|&v| (0.5 - 1e-9..=1.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(1.0, 2.0, 10);
        assert_eq!(v[0], 1.0);
        assert!((v[9] - 2.0).abs() < 1e-15);
        assert!((v[1] - (1.0 + 1.0 / 9.0)).abs() < 1e-15);
    }
}
