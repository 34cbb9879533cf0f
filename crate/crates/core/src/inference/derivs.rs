use nalgebra::{DMatrix, DVector};

use super::layout::{inner_ddot, inner_dot, sigma_dot, Coord, FreeSet, ParamLayout};
use crate::distributions::special::{digamma_unchecked, trigamma_unchecked};
use crate::distributions::CovFactorization;
use crate::error::{Result, TbfaError};
use crate::model::{MatrixDataset, TbfaParams};

/// Dense inverses and sizes shared by the derivative routines.
pub(crate) struct Ctx<'a> {
    pub p: &'a TbfaParams,
    pub d_c: usize,
    pub d_r: usize,
    pub dd: f64,
    pub nu: Option<f64>,
    pub sc: DMatrix<f64>,
    pub sr: DMatrix<f64>,
    pub sc_inv: DMatrix<f64>,
    pub sr_inv: DMatrix<f64>,
}

/// Per-observation quantities.
pub(crate) struct Obs {
    /// Σ_c⁻¹ (X − W) Σ_r⁻¹
    pub a: DMatrix<f64>,
    pub delta: f64,
    /// (ν + D)/(ν + δ), or 1 in Gaussian mode
    pub w: f64,
    /// (ν + D)/(ν + δ)², or 0 in Gaussian mode
    pub c2: f64,
    /// (δ − D)/(ν + δ)²
    pub dnu: f64,
    /// A Σ_r Aᵀ
    pub gc: DMatrix<f64>,
    /// Aᵀ Σ_c A
    pub gr: DMatrix<f64>,
}

impl<'a> Ctx<'a> {
    pub fn new(p: &'a TbfaParams) -> Result<Self> {
        p.validate()?;
        let sc = p.sigma_c();
        let sr = p.sigma_r();
        let sc_inv = CovFactorization::new(sc.clone())?.inverse();
        let sr_inv = CovFactorization::new(sr.clone())?.inverse();
        let (d_c, d_r) = (p.d_c(), p.d_r());
        Ok(Self { p, d_c, d_r, dd: (d_c * d_r) as f64, nu: p.finite_nu(), sc, sr, sc_inv, sr_inv })
    }

    pub fn obs(&self, x: &DMatrix<f64>) -> Obs {
        let e = x - &self.p.w;
        let a = &self.sc_inv * &e * &self.sr_inv;
        let delta = e.dot(&a);
        let (w, c2, dnu) = match self.nu {
            Some(nu) => {
                let den = nu + delta;
                ((nu + self.dd) / den, (nu + self.dd) / (den * den), (delta - self.dd) / (den * den))
            }
            None => (1.0, 0.0, 0.0),
        };
        let gc = &a * &self.sr * a.transpose();
        let gr = a.transpose() * &self.sc * &a;
        Obs { a, delta, w, c2, dnu, gc, gr }
    }

    fn side(&self, col: bool) -> (&DMatrix<f64>, &DMatrix<f64>, usize) {
        if col {
            (&self.p.c, &self.sc_inv, self.d_r)
        } else {
            (&self.p.r, &self.sr_inv, self.d_c)
        }
    }

    /// g_θ = εᵀ Ω Σ̇ Ω ε for every side coordinate of the layout.
    fn g_values(&self, layout: &ParamLayout, o: &Obs) -> Vec<f64> {
        layout
            .coords()
            .iter()
            .map(|c| match c {
                Coord::Col(sp) => inner_dot(&o.gc, &self.p.c, *sp),
                Coord::Row(sp) => inner_dot(&o.gr, &self.p.r, *sp),
                _ => 0.0,
            })
            .collect()
    }

    fn nu_score(&self, o: &Obs) -> f64 {
        let nu = self.nu.expect("t model");
        0.5 * (digamma_unchecked((nu + self.dd) / 2.0) - digamma_unchecked(nu / 2.0) + nu.ln() + 1.0
            - (nu + o.delta).ln()
            - o.w)
    }
}

fn check(params: &TbfaParams, data: &MatrixDataset) -> Result<()> {
    if params.d_c() != data.d_c() || params.d_r() != data.d_r() {
        return Err(TbfaError::Dimension(format!(
            "parameters are {}x{} but data are {}x{}",
            params.d_c(),
            params.d_r(),
            data.d_c(),
            data.d_r()
        )));
    }
    Ok(())
}

/// Per-observation scores, one row per observation.
pub fn score_contributions(params: &TbfaParams, data: &MatrixDataset, free: FreeSet) -> Result<DMatrix<f64>> {
    check(params, data)?;
    let ctx = Ctx::new(params)?;
    let layout = ParamLayout::new(params, free);
    let mut out = DMatrix::zeros(data.n(), layout.len());
    for (n, x) in data.observations().iter().enumerate() {
        let o = ctx.obs(x);
        // ½(w G − d Σ⁻¹) is the gradient with respect to the side covariance
        let gam_c = (&o.gc * o.w - &ctx.sc_inv * ctx.d_r as f64) * 0.5;
        let gam_r = (&o.gr * o.w - &ctx.sr_inv * ctx.d_c as f64) * 0.5;
        for (k, c) in layout.coords().iter().enumerate() {
            out[(n, k)] = match *c {
                Coord::Mean { row, col } => o.w * o.a[(row, col)],
                Coord::Col(sp) => inner_dot(&gam_c, &params.c, sp),
                Coord::Row(sp) => inner_dot(&gam_r, &params.r, sp),
                Coord::Nu => ctx.nu_score(&o),
            };
        }
    }
    Ok(out)
}

/// Gradient of the log-likelihood over the free coordinates.
pub fn score_vector(params: &TbfaParams, data: &MatrixDataset, free: FreeSet) -> Result<DVector<f64>> {
    let s = score_contributions(params, data, free)?;
    Ok(DVector::from_fn(s.ncols(), |k, _| s.column(k).sum()))
}

/// Hessian of the log-likelihood over the free coordinates.
pub fn observed_hessian(params: &TbfaParams, data: &MatrixDataset, free: FreeSet) -> Result<DMatrix<f64>> {
    check(params, data)?;
    let ctx = Ctx::new(params)?;
    let layout = ParamLayout::new(params, free);
    let np = layout.len();
    let (d_c, d_r) = (ctx.d_c, ctx.d_r);
    let dd = d_c * d_r;
    let n = data.n() as f64;

    // sums over observations
    let mut sum_w = 0.0;
    let mut a_bar = DMatrix::zeros(d_c, d_r);
    let mut gc_bar = DMatrix::zeros(d_c, d_c);
    let mut gr_bar = DMatrix::zeros(d_r, d_r);
    let mut k_w = DMatrix::zeros(dd, dd);
    let mut k_c2 = DMatrix::zeros(dd, dd);
    let mut gg = DMatrix::zeros(np, np);
    let mut mu_g = DMatrix::zeros(dd, np);
    let mut mu_nu = DVector::zeros(dd);
    let mut g_nu = DVector::zeros(np);
    let mut nu_nu = 0.0;
    for x in data.observations() {
        let o = ctx.obs(x);
        let va = DVector::from_column_slice(o.a.as_slice());
        let g = DVector::from_vec(ctx.g_values(&layout, &o));
        sum_w += o.w;
        a_bar += &o.a * o.w;
        gc_bar += &o.gc * o.w;
        gr_bar += &o.gr * o.w;
        k_w.ger(o.w, &va, &va, 1.0);
        if o.c2 != 0.0 {
            k_c2.ger(o.c2, &va, &va, 1.0);
            gg.ger(o.c2, &g, &g, 1.0);
            mu_g.ger(o.c2, &va, &g, 1.0);
        }
        if let Some(nu) = ctx.nu {
            mu_nu.axpy(o.dnu, &va, 1.0);
            g_nu.axpy(0.5 * o.dnu, &g, 1.0);
            nu_nu += -0.5 / (nu + o.delta) - 0.5 * o.dnu;
        }
    }

    let omega = ctx.sr_inv.kronecker(&ctx.sc_inv);
    let mut h = DMatrix::zeros(np, np);
    let coords = layout.coords();
    let dots: Vec<Option<DMatrix<f64>>> = coords
        .iter()
        .map(|c| match *c {
            Coord::Col(sp) => Some(sigma_dot(&params.c, sp)),
            Coord::Row(sp) => Some(sigma_dot(&params.r, sp)),
            _ => None,
        })
        .collect();
    // Σ⁻¹ Σ̇ per side coordinate
    let sol: Vec<Option<DMatrix<f64>>> = coords
        .iter()
        .zip(&dots)
        .map(|(c, d)| match (c, d) {
            (Coord::Col(_), Some(d)) => Some(&ctx.sc_inv * d),
            (Coord::Row(_), Some(d)) => Some(&ctx.sr_inv * d),
            _ => None,
        })
        .collect();

    // Ω Σ̇ Ω-weighted mean residual, reshaped d_c × d_r
    let mean_side: Vec<Option<DMatrix<f64>>> = coords
        .iter()
        .zip(&dots)
        .map(|(c, d)| match (c, d) {
            (Coord::Col(_), Some(d)) => Some(&ctx.sc_inv * d * &a_bar),
            (Coord::Row(_), Some(d)) => Some(&a_bar * d * &ctx.sr_inv),
            _ => None,
        })
        .collect();

    for a in 0..np {
        for b in a..np {
            let v = match (coords[a], coords[b]) {
                (Coord::Mean { row: i, col: j }, Coord::Mean { row: k, col: l }) => {
                    let (p, q) = (i + d_c * j, k + d_c * l);
                    2.0 * k_c2[(p, q)] - sum_w * omega[(p, q)]
                }
                (Coord::Mean { row, col }, Coord::Col(_) | Coord::Row(_)) => {
                    mu_g[(row + d_c * col, b)] - mean_side[b].as_ref().unwrap()[(row, col)]
                }
                (Coord::Mean { row, col }, Coord::Nu) => mu_nu[row + d_c * col],
                (Coord::Col(sa), Coord::Col(sb)) | (Coord::Row(sa), Coord::Row(sb)) => {
                    let col = matches!(coords[a], Coord::Col(_));
                    let (_, inv, other) = ctx.side(col);
                    let gbar = if col { &gc_bar } else { &gr_bar };
                    let (pa, pb) = (sol[a].as_ref().unwrap(), sol[b].as_ref().unwrap());
                    let tr_pp = pa.dot(&pb.transpose());
                    let tr_inv_dd = inner_ddot(inv, sa, sb);
                    let quad = (dots[a].as_ref().unwrap() * pb).dot(gbar);
                    0.5 * other as f64 * n * (tr_pp - tr_inv_dd) + 0.5 * gg[(a, b)] - quad
                        + 0.5 * inner_ddot(gbar, sa, sb)
                }
                (Coord::Col(_), Coord::Row(_)) => {
                    let kron = kron_inner(&k_w, dots[b].as_ref().unwrap(), dots[a].as_ref().unwrap());
                    0.5 * gg[(a, b)] - 0.5 * kron
                }
                (Coord::Col(_) | Coord::Row(_), Coord::Nu) => g_nu[a],
                (Coord::Nu, Coord::Nu) => {
                    let nu = ctx.nu.unwrap();
                    n * (0.25 * trigamma_unchecked((nu + ctx.dd) / 2.0) - 0.25 * trigamma_unchecked(nu / 2.0)
                        + 0.5 / nu)
                        + nu_nu
                }
                _ => unreachable!("layout orders mean, column, row, nu"),
            };
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(h)
}

/// ⟨K, R⊗C⟩ for a (d_c d_r)² matrix K in column-major vec ordering.
pub(crate) fn kron_inner(k: &DMatrix<f64>, r: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let d_c = c.nrows();
    let d_r = r.nrows();
    let mut s = 0.0;
    for b in 0..d_r {
        for d in 0..d_r {
            let rv = r[(b, d)];
            if rv == 0.0 {
                continue;
            }
            s += rv * k.view((b * d_c, d * d_c), (d_c, d_c)).dot(c);
        }
    }
    s
}
