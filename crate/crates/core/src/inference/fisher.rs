use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::derivs::Ctx;
use super::layout::{inner_dot, sigma_dot, Coord, FreeSet, ParamLayout};
use crate::distributions::special::trigamma_unchecked;
use crate::error::{Result, TbfaError};
use crate::model::TbfaParams;

/// Expected information over a parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub layout: ParamLayout,
    pub matrix: DMatrix<f64>,
}

/// Closed-form expected information of `n` observations.
pub fn fisher_information(params: &TbfaParams, n: usize, free: FreeSet) -> Result<FisherInfo> {
    let ctx = Ctx::new(params)?;
    let layout = ParamLayout::new(params, free);
    let np = layout.len();
    let nf = n as f64;
    let (d_c, d_r, dd) = (ctx.d_c as f64, ctx.d_r as f64, ctx.dd);
    let coords = layout.coords();

    // (ν+D)/(ν+D+2), 1/(ν+D+2) and friends, with their Gaussian limits
    let (ratio, inv2, nu_val) = match ctx.nu {
        Some(nu) => ((nu + dd) / (nu + dd + 2.0), 1.0 / (nu + dd + 2.0), nu),
        None => (1.0, 0.0, f64::INFINITY),
    };

    let tr: Vec<f64> = coords
        .iter()
        .map(|c| match *c {
            Coord::Col(sp) => inner_dot(&ctx.sc_inv, &params.c, sp),
            Coord::Row(sp) => inner_dot(&ctx.sr_inv, &params.r, sp),
            _ => 0.0,
        })
        .collect();
    let sol: Vec<Option<DMatrix<f64>>> = coords
        .iter()
        .map(|c| match *c {
            Coord::Col(sp) => Some(&ctx.sc_inv * sigma_dot(&params.c, sp)),
            Coord::Row(sp) => Some(&ctx.sr_inv * sigma_dot(&params.r, sp)),
            _ => None,
        })
        .collect();

    let omega = ctx.sr_inv.kronecker(&ctx.sc_inv);
    let d_c_us = ctx.d_c;
    let mut m = DMatrix::zeros(np, np);
    for a in 0..np {
        for b in a..np {
            let v = match (coords[a], coords[b]) {
                (Coord::Mean { row: i, col: j }, Coord::Mean { row: k, col: l }) => {
                    nf * ratio * omega[(i + d_c_us * j, k + d_c_us * l)]
                }
                (Coord::Mean { .. }, _) => 0.0,
                (Coord::Col(_), Coord::Col(_)) | (Coord::Row(_), Coord::Row(_)) => {
                    let other = if matches!(coords[a], Coord::Col(_)) { d_r } else { d_c };
                    let (pa, pb) = (sol[a].as_ref().unwrap(), sol[b].as_ref().unwrap());
                    let q = pa.dot(&pb.transpose());
                    0.5 * nf * other * (ratio * q - other * inv2 * tr[a] * tr[b])
                }
                (Coord::Col(_), Coord::Row(_)) => {
                    // ν/(ν+D+2) → 1 in the Gaussian limit
                    let lead = if nu_val.is_finite() { nu_val * inv2 } else { 1.0 };
                    0.5 * nf * lead * tr[a] * tr[b]
                }
                (Coord::Col(_) | Coord::Row(_), Coord::Nu) => {
                    let nu = nu_val;
                    let other = if matches!(coords[a], Coord::Col(_)) { d_r } else { d_c };
                    -nf * other * tr[a] / ((nu + dd) * (nu + dd + 2.0))
                }
                (Coord::Nu, Coord::Nu) => {
                    let nu = nu_val;
                    nf * (0.25 * trigamma_unchecked(nu / 2.0) - 0.25 * trigamma_unchecked((nu + dd) / 2.0)
                        - dd * (nu + dd + 4.0) / (2.0 * nu * (nu + dd) * (nu + dd + 2.0)))
                }
                _ => unreachable!("layout orders mean, column, row, nu"),
            };
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(FisherInfo { layout, matrix: m })
}

/// Named standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl StandardErrors {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k])
    }
}

/// √diag(I_N⁻¹) over the free coordinates.
pub fn standard_errors(params: &TbfaParams, n: usize, free: FreeSet) -> Result<StandardErrors> {
    let info = fisher_information(params, n, free)?;
    let cov = invert_information(&info)?;
    Ok(StandardErrors {
        names: info.layout.names().to_vec(),
        values: cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
    })
}

/// Inverse of the information, or the directions along which it is singular.
pub fn invert_information(info: &FisherInfo) -> Result<DMatrix<f64>> {
    let m = &info.matrix;
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(ch) = m.clone().cholesky() {
        let l = ch.l_dirty();
        let min_pivot = (0..m.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-12 * scale {
            return Ok(ch.inverse());
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let names = info.layout.names();
    let mut null = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 1e-10 * scale {
            let v = eig.eigenvectors.column(k);
            let mut terms: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|(_, x)| x.abs() > 0.1).collect();
            terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            null.push(
                terms.iter().map(|(i, x)| format!("{x:+.3}*{}", names[*i])).collect::<Vec<_>>().join(" "),
            );
        }
    }
    if null.is_empty() {
        null.push("ill-conditioned information".into());
    }
    Err(TbfaError::Singular { null_directions: null })
}
