use nalgebra::{DMatrix, DVector};

use super::config::{Algorithm, FitConfig, Stage};
use super::steps::{
    aecm_nu_constant, px_nu_constant, solve_nu_ecme, solve_nu_em, update_loadings_eigen,
    update_psi_sequential, weighted_scatter,
};
use crate::error::{Result, TbfaError};
use crate::linalg::{block_dots, block_transpose, center_stack, row_dots, scale_blocks, weighted_block_mean};
use crate::model::{log_density_terms, tau_from_deltas, MatrixDataset, SideCov, TbfaParams};

pub(crate) type Probe<'a> = Option<&'a mut dyn FnMut(Stage, &TbfaParams)>;

/// Current iterate in factor form.
pub(crate) struct State {
    pub w: DMatrix<f64>,
    pub col: SideCov,
    pub row: SideCov,
    pub nu: f64,
    pub deltas: Vec<f64>,
    pub loglik: f64,
    pub saturated: bool,
}

impl State {
    pub fn params(&self, gaussian: bool) -> TbfaParams {
        TbfaParams {
            w: self.w.clone(),
            c: self.col.loading().clone(),
            psi_c: self.col.psi().clone(),
            r: self.row.loading().clone(),
            psi_r: self.row.psi().clone(),
            nu: if gaussian { f64::INFINITY } else { self.nu },
            gaussian,
        }
    }
}

pub(crate) struct Engine<'a> {
    n: usize,
    d_c: usize,
    d_r: usize,
    x: DMatrix<f64>,
    cfg: &'a FitConfig,
}

impl<'a> Engine<'a> {
    pub fn new(data: &MatrixDataset, cfg: &'a FitConfig) -> Self {
        Self { n: data.n(), d_c: data.d_c(), d_r: data.d_r(), x: data.stack(), cfg }
    }

    fn dim(&self) -> usize {
        self.d_c * self.d_r
    }

    fn nu_opt(&self, nu: f64) -> Option<f64> {
        (!self.cfg.gaussian).then_some(nu)
    }

    fn tau(&self, nu: f64, deltas: &[f64]) -> Vec<f64> {
        tau_from_deltas(self.nu_opt(nu), self.dim(), deltas)
    }

    fn loglik(&self, st: &State) -> f64 {
        let shape = (self.d_c, self.d_r);
        log_density_terms(self.nu_opt(st.nu), shape, &st.deltas, st.col.log_det(), st.row.log_det())
            .iter()
            .sum()
    }

    /// Builds the starting state from parameters.
    pub fn start(&self, p: &TbfaParams) -> Result<State> {
        let col = p.col_side()?;
        let row = p.row_side()?;
        let hc = center_stack(&self.x, &p.w, self.n);
        let deltas = crate::model::stacked_deltas(&hc, self.n, &col, &row);
        let mut st = State {
            w: p.w.clone(),
            col,
            row,
            nu: if self.cfg.gaussian { f64::INFINITY } else { p.nu },
            deltas,
            loglik: 0.0,
            saturated: false,
        };
        st.loglik = self.loglik(&st);
        Ok(st)
    }

    fn residuals(&self, w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let hc = center_stack(&self.x, w, self.n);
        let hr = block_transpose(&hc, self.n);
        (hc, hr)
    }

    /// Stack of (X_n−W)Σ⁻¹ for the side held in `side`, given the transposed residual stack.
    fn right_solve(&self, side: &SideCov, h_other: &DMatrix<f64>) -> DMatrix<f64> {
        block_transpose(&side.solve(h_other), self.n)
    }

    fn emit(&self, probe: &mut Probe<'_>, stage: Stage, st: &State) {
        if let Some(f) = probe.as_mut() {
            f(stage, &st.params(self.cfg.gaussian));
        }
    }

    pub fn iterate(&self, st: &mut State, probe: &mut Probe<'_>) -> Result<()> {
        match self.cfg.algorithm {
            Algorithm::Ecme => self.ecme(st, false, probe),
            Algorithm::PxEcme => self.ecme(st, true, probe),
            Algorithm::Aecm => self.aecm(st, probe),
            Algorithm::PxAecm => self.px_aecm(st, probe),
        }
    }

    fn eigen_side(&self, s: &DMatrix<f64>, side: &SideCov) -> Result<SideCov> {
        let (loading, _) = update_loadings_eigen(s, side.psi(), side.factors());
        let psi = update_psi_sequential(s, &loading, side.psi(), self.cfg.eta);
        SideCov::new(loading, psi)
    }

    fn ecme(&self, st: &mut State, px: bool, probe: &mut Probe<'_>) -> Result<()> {
        let (n, d_c, d_r) = (self.n, self.d_c, self.d_r);
        let tau = self.tau(st.nu, &st.deltas);
        let total: f64 = tau.iter().sum();
        st.w = weighted_block_mean(&self.x, &tau, d_r);
        self.emit(probe, Stage::First, st);
        let (hc, hr) = self.residuals(&st.w);
        let scale = if px { n as f64 / total } else { 1.0 };

        let bc = self.right_solve(&st.row, &hr);
        let s_c = weighted_scatter(&bc, &hc, &tau, d_r) * (scale / (n * d_r) as f64);
        st.col = self.eigen_side(&s_c, &st.col)?;
        self.emit(probe, Stage::Column, st);

        let a = st.col.solve(&hc);
        let ar = block_transpose(&a, n);
        let s_r = weighted_scatter(&ar, &hr, &tau, d_c) * (scale / (n * d_c) as f64);
        st.row = self.eigen_side(&s_r, &st.row)?;
        self.emit(probe, Stage::Row, st);

        let bc = self.right_solve(&st.row, &hr);
        st.deltas = block_dots(&a, &bc, d_r);
        if !self.cfg.gaussian {
            let sol = solve_nu_ecme(&st.deltas, self.dim(), self.cfg.nu_bounds)?;
            st.nu = sol.nu;
            st.saturated = sol.saturated;
            self.emit(probe, Stage::Nu, st);
        }
        st.loglik = self.loglik(st);
        Ok(())
    }

    /// Column-side update treating the latent row components as missing data.
    ///
    /// `h` is the residual stack for this side and `bo` the same stack with the
    /// other side's Σ⁻¹ applied on the right.
    fn aecm_side(&self, h: &DMatrix<f64>, bo: &DMatrix<f64>, tau: &[f64], side: &SideCov, d_o: usize) -> Result<SideCov> {
        let nd = (self.n * d_o) as f64;
        let bt = scale_blocks(bo, tau, d_o);
        let diag_s = row_dots(&bt, h);
        let q = side.factors();
        if q == 0 {
            let psi = diag_s.map(|v| (v / nd).max(self.cfg.eta));
            return SideCov::new(side.loading().clone(), psi);
        }
        let p = side.projector();
        let y = p.tr_mul(h);
        let g = crate::linalg::mul_bt(&bt, &y);
        let mut gram = side.m_inverse() * nd + p.tr_mul(&g);
        crate::linalg::symmetrize(&mut gram);
        let loading = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&g.transpose()).transpose(),
            None => gram
                .lu()
                .solve(&g.transpose())
                .ok_or_else(|| TbfaError::Factorization("singular AECM loading system".into()))?
                .transpose(),
        };
        let gc = row_dots(&g, &loading);
        let psi = DVector::from_fn(side.dim(), |i, _| ((diag_s[i] - gc[i]) / nd).max(self.cfg.eta));
        SideCov::new(loading, psi)
    }

    fn aecm(&self, st: &mut State, probe: &mut Probe<'_>) -> Result<()> {
        let (n, d_c, d_r, dd) = (self.n, self.d_c, self.d_r, self.dim());
        let tau = self.tau(st.nu, &st.deltas);
        st.w = weighted_block_mean(&self.x, &tau, d_r);
        if !self.cfg.gaussian {
            let sol = solve_nu_em(aecm_nu_constant(st.nu, dd, &tau), self.cfg.nu_bounds)?;
            st.nu = sol.nu;
            st.saturated = sol.saturated;
        }
        self.emit(probe, Stage::First, st);
        let (hc, hr) = self.residuals(&st.w);

        let a = st.col.solve(&hc);
        let bc = self.right_solve(&st.row, &hr);
        let tau = self.tau(st.nu, &block_dots(&a, &bc, d_r));
        st.col = self.aecm_side(&hc, &bc, &tau, &st.col, d_r)?;
        self.emit(probe, Stage::Column, st);

        let a = st.col.solve(&hc);
        let tau = self.tau(st.nu, &block_dots(&a, &bc, d_r));
        let ar = block_transpose(&a, n);
        st.row = self.aecm_side(&hr, &ar, &tau, &st.row, d_c)?;
        self.emit(probe, Stage::Row, st);

        let bc = self.right_solve(&st.row, &hr);
        st.deltas = block_dots(&a, &bc, d_r);
        st.loglik = self.loglik(st);
        Ok(())
    }

    fn px_aecm(&self, st: &mut State, probe: &mut Probe<'_>) -> Result<()> {
        if self.cfg.gaussian {
            return self.aecm(st, probe);
        }
        let (n, d_c, d_r, dd) = (self.n, self.d_c, self.d_r, self.dim());
        let ddf = dd as f64;
        let tau = self.tau(st.nu, &st.deltas);
        let alpha = tau.iter().sum::<f64>() / n as f64;
        st.w = weighted_block_mean(&self.x, &tau, d_r);
        let sol = solve_nu_em(px_nu_constant(st.nu, dd, &st.deltas, alpha), self.cfg.nu_bounds)?;
        st.nu = sol.nu;
        st.saturated = sol.saturated;
        let nu = st.nu;
        // expanded column covariance: the observed-data Σ_c is col_star / α
        let mut col_star = st.col.clone();
        if probe.is_some() {
            st.col = reduce(&col_star, alpha)?;
            self.emit(probe, Stage::First, st);
        }
        let (hc, hr) = self.residuals(&st.w);
        let tau_star = |raw: &[f64]| -> Vec<f64> {
            raw.iter().map(|&dl| alpha * (nu + ddf) / (nu + alpha * dl)).collect()
        };

        let a = col_star.solve(&hc);
        let bc = self.right_solve(&st.row, &hr);
        let tau = tau_star(&block_dots(&a, &bc, d_r));
        col_star = self.aecm_side(&hc, &bc, &tau, &col_star, d_r)?;
        if probe.is_some() {
            st.col = reduce(&col_star, alpha)?;
            self.emit(probe, Stage::Column, st);
        }

        let a = col_star.solve(&hc);
        let tau = tau_star(&block_dots(&a, &bc, d_r));
        let ar = block_transpose(&a, n);
        st.row = self.aecm_side(&hr, &ar, &tau, &st.row, d_c)?;
        st.col = reduce(&col_star, alpha)?;
        self.emit(probe, Stage::Row, st);

        let a = st.col.solve(&hc);
        let bc = self.right_solve(&st.row, &hr);
        st.deltas = block_dots(&a, &bc, d_r);
        st.loglik = self.loglik(st);
        Ok(())
    }
}

/// (C*, Ψ*) ↦ (C*/√α, Ψ*/α).
fn reduce(side: &SideCov, alpha: f64) -> Result<SideCov> {
    SideCov::new(side.loading() / alpha.sqrt(), side.psi() / alpha)
}
