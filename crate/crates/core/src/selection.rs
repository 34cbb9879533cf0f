//! BIC and grid search over factor dimensions.

use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::distributions::RngStream;
use crate::error::{Result, TbfaError};
use crate::estimation::{fit_best_of, FitConfig, FitResult};
use crate::model::{free_param_count, max_factors, MatrixDataset};
use crate::simbench::map_indexed;

/// −2 L + D ln N.
pub fn bic(fit: &FitResult, data: &MatrixDataset) -> f64 {
    bic_value(fit.loglik(), fit.params.free_param_count(), data.n())
}

pub fn bic_value(loglik: f64, free_params: usize, n: usize) -> f64 {
    -2.0 * loglik + free_params as f64 * (n as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCell {
    pub q_c: usize,
    pub q_r: usize,
    pub bic: f64,
    pub loglik: f64,
    pub converged: bool,
    pub nu_hat: f64,
    pub free_params: usize,
    /// Set when every restart failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Row-major over (q_c, q_r).
    pub grid: Vec<SelectionCell>,
    pub best: (usize, usize),
}

impl SelectionReport {
    pub fn get(&self, q_c: usize, q_r: usize) -> Option<&SelectionCell> {
        self.grid.iter().find(|c| c.q_c == q_c && c.q_r == q_r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Seed and settings of every fit; per-cell seeds are split from `fit.seed`.
    pub fit: FitConfig,
    pub restarts: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), restarts: 3 }
    }
}

/// Fits every (q_c, q_r) cell and picks the BIC minimizer.
pub fn grid_select(
    data: &MatrixDataset,
    q_c_range: RangeInclusive<usize>,
    q_r_range: RangeInclusive<usize>,
    config: &SelectionConfig,
) -> Result<SelectionReport> {
    if q_c_range.is_empty() || q_r_range.is_empty() {
        return Err(TbfaError::Config("empty factor range".into()));
    }
    for (name, r, d) in [("q_c", &q_c_range, data.d_c()), ("q_r", &q_r_range, data.d_r())] {
        if *r.end() > max_factors(d) {
            return Err(TbfaError::Dimension(format!(
                "{name} range ends at {} but max_factors({d}) = {}",
                r.end(),
                max_factors(d)
            )));
        }
    }
    let cells: Vec<(usize, usize)> =
        q_c_range.flat_map(|a| q_r_range.clone().map(move |b| (a, b))).collect();
    let master = RngStream::new(config.fit.seed);
    let grid: Vec<SelectionCell> = map_indexed(cells.len(), |k| {
        let (q_c, q_r) = cells[k];
        let cfg = FitConfig { seed: master.split(k as u64).seed(), ..config.fit.clone() };
        let d = free_param_count(data.d_c(), data.d_r(), q_c, q_r) - usize::from(cfg.gaussian);
        match fit_best_of(data, q_c, q_r, &cfg, config.restarts) {
            Ok(r) => SelectionCell {
                q_c,
                q_r,
                bic: bic(&r, data),
                loglik: r.loglik(),
                converged: r.converged,
                nu_hat: r.params.nu,
                free_params: d,
                error: None,
            },
            Err(e) => SelectionCell {
                q_c,
                q_r,
                bic: f64::NAN,
                loglik: f64::NAN,
                converged: false,
                nu_hat: f64::NAN,
                free_params: d,
                error: Some(e.to_string()),
            },
        }
    });
    let best = pick_best(&grid).ok_or_else(|| {
        let diag: Vec<String> = grid
            .iter()
            .map(|c| format!("({},{}): {}", c.q_c, c.q_r, c.error.as_deref().unwrap_or("?")))
            .collect();
        TbfaError::Selection(format!("every cell failed: {}", diag.join("; ")))
    })?;
    Ok(SelectionReport { grid, best })
}

/// Smallest BIC over converged cells, else over every successful cell.
fn pick_best(grid: &[SelectionCell]) -> Option<(usize, usize)> {
    let key = |c: &SelectionCell| (c.bic, c.free_params, c.q_c, c.q_r);
    let better = |a: &SelectionCell, b: &SelectionCell| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(ka.2.cmp(&kb.2)).then(ka.3.cmp(&kb.3))
    };
    let ok = |c: &&SelectionCell| c.error.is_none() && c.bic.is_finite();
    let pool: Vec<&SelectionCell> = if grid.iter().filter(ok).any(|c| c.converged) {
        grid.iter().filter(ok).filter(|c| c.converged).collect()
    } else {
        grid.iter().filter(ok).collect()
    };
    pool.into_iter().min_by(|a, b| better(a, b)).map(|c| (c.q_c, c.q_r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(q_c: usize, q_r: usize, bic: f64, free_params: usize, converged: bool) -> SelectionCell {
        SelectionCell { q_c, q_r, bic, loglik: 0.0, converged, nu_hat: 5.0, free_params, error: None }
    }

    #[test]
    fn penalty_vanishes_for_one_observation() {
        assert_eq!(bic_value(-3.0, 50, 1), 6.0);
    }

    #[test]
    fn ties_prefer_fewer_parameters_then_lexicographic() {
        let g = vec![cell(2, 1, 10.0, 30, true), cell(1, 2, 10.0, 28, true), cell(1, 3, 10.0, 28, true)];
        assert_eq!(pick_best(&g), Some((1, 2)));
    }

    #[test]
    fn unconverged_cells_lose_to_converged_ones() {
        let g = vec![cell(1, 1, 5.0, 20, false), cell(2, 2, 9.0, 40, true)];
        assert_eq!(pick_best(&g), Some((2, 2)));
        let g = vec![cell(1, 1, 5.0, 20, false), cell(2, 2, 9.0, 40, false)];
        assert_eq!(pick_best(&g), Some((1, 1)));
    }
}
