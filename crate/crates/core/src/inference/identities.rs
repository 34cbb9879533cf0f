use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{sigma_dot, FreeSet, ParamLayout};
use super::derivs::Ctx;
use crate::distributions::{sample_mt, CovFactorization, RngStream};
use crate::error::{Result, TbfaError};
use crate::model::TbfaParams;
use crate::simbench::map_indexed;

/// Monte Carlo check of the eight moment identities (a)–(h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Monte Carlo values; Frobenius norms for the matrix identities (d), (e).
    pub estimates: [f64; 8],
    pub closed_forms: [f64; 8],
    pub rel_errors: [f64; 8],
    /// Layout names of the derivative coordinates (i, j, k, s).
    pub indices: [String; 4],
    pub samples: usize,
}

#[derive(Clone)]
struct Sums {
    s: [f64; 6], // a, b, c, f, g, h
    d: DMatrix<f64>,
    e: DMatrix<f64>,
}

impl Sums {
    fn new(dd: usize) -> Self {
        Self { s: [0.0; 6], d: DMatrix::zeros(dd, dd), e: DMatrix::zeros(dd, dd) }
    }

    fn add(&mut self, o: &Sums) {
        for k in 0..6 {
            self.s[k] += o.s[k];
        }
        self.d += &o.d;
        self.e += &o.e;
    }
}

const CHUNK: usize = 20_000;

/// Draws `sample_count` observations from the model at `params` and compares
/// the sample moments with their closed forms. Derivative coordinates are
/// drawn at random from `rng`.
pub fn verify_expectation_identities(
    params: &TbfaParams,
    sample_count: usize,
    rng: &RngStream,
) -> Result<IdentityReport> {
    let nu = params
        .finite_nu()
        .ok_or_else(|| TbfaError::Config("the identities need a finite nu".into()))?;
    if sample_count == 0 {
        return Err(TbfaError::Config("sample_count must be positive".into()));
    }
    let ctx = Ctx::new(params)?;
    let (d_c, d_r) = (ctx.d_c, ctx.d_r);
    let dd = ctx.dd;
    let layout = ParamLayout::new(params, FreeSet::Full);
    let cols: Vec<usize> = layout.col_range().collect();
    let rows: Vec<usize> = layout.row_range().collect();

    let dot_of = |k: usize| match layout.coords()[k] {
        super::layout::Coord::Col(sp) => sigma_dot(&params.c, sp),
        super::layout::Coord::Row(sp) => sigma_dot(&params.r, sp),
        _ => unreachable!("side coordinates only"),
    };
    let trace = |inv: &DMatrix<f64>, s: &DMatrix<f64>| (inv * s).trace();
    let tr2 = |inv: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>| (inv * a * inv * b).trace();

    let mut pick = rng.split(u64::MAX);
    let mut choose = |pool: &[usize]| pool[pick.random_range(0..pool.len())];
    // keep a pair whose closed form is not a near-cancellation of its terms
    let mut pair = |pool: &[usize], inv: &DMatrix<f64>, other: f64| {
        let mut best = (pool[0], pool[0], -1.0);
        for _ in 0..100 {
            let (i, j) = (choose(pool), choose(pool));
            let (si, sj) = (dot_of(i), dot_of(j));
            let t1 = other * other * trace(inv, &si) * trace(inv, &sj);
            let t2 = 2.0 * other * tr2(inv, &si, &sj);
            let ratio = (t1 + t2).abs() / (t1.abs() + t2.abs()).max(f64::MIN_POSITIVE);
            if ratio > best.2 {
                best = (i, j, ratio);
            }
            if ratio > 0.5 {
                break;
            }
        }
        (best.0, best.1)
    };
    let (i, j) = pair(&cols, &ctx.sc_inv, d_r as f64);
    let (k, s) = pair(&rows, &ctx.sr_inv, d_c as f64);
    let (dci, dcj, drk, drs) = (dot_of(i), dot_of(j), dot_of(k), dot_of(s));
    // Σ⁻¹ Σ̇ Σ⁻¹
    let pci = &ctx.sc_inv * &dci * &ctx.sc_inv;
    let pcj = &ctx.sc_inv * &dcj * &ctx.sc_inv;
    let prk = &ctx.sr_inv * &drk * &ctx.sr_inv;
    let prs = &ctx.sr_inv * &drs * &ctx.sr_inv;

    let col_f = CovFactorization::new(ctx.sc.clone())?;
    let row_f = CovFactorization::new(ctx.sr.clone())?;
    let chunks = sample_count.div_ceil(CHUNK);
    let dn = d_c * d_r;
    let parts: Vec<Result<Sums>> = map_indexed(chunks, |c| {
        let mut r = rng.split(c as u64);
        let m = CHUNK.min(sample_count - c * CHUNK);
        let mut acc = Sums::new(dn);
        for _ in 0..m {
            let x = sample_mt(&params.w, &col_f, &row_f, nu, &mut r)?;
            let e = x - &params.w;
            let a = &ctx.sc_inv * &e * &ctx.sr_inv;
            let delta = e.dot(&a);
            let inv1 = 1.0 / (nu + delta);
            let inv2 = inv1 * inv1;
            let v = DVector::from_column_slice(e.as_slice());
            let b_c = &e * &ctx.sr_inv * e.transpose();
            let b_r = e.transpose() * &ctx.sc_inv * &e;
            let (qci, qcj) = (pci.dot(&b_c), pcj.dot(&b_c));
            let (qrk, qrs) = (prk.dot(&b_r), prs.dot(&b_r));
            acc.s[0] += inv1;
            acc.s[1] += delta * inv1;
            acc.s[2] += nu * nu * inv2;
            acc.s[3] += inv2 * qrk * qci;
            acc.s[4] += inv2 * qci * qcj;
            acc.s[5] += inv2 * qrk * qrs;
            acc.d.ger(inv1, &v, &v, 1.0);
            acc.e.ger(inv2, &v, &v, 1.0);
        }
        Ok(acc)
    });
    let mut tot = Sums::new(dn);
    for p in parts {
        tot.add(&p?);
    }
    let nn = sample_count as f64;
    let big = ctx.sr.kronecker(&ctx.sc);
    let k1 = 1.0 / (nu + dd);
    let k2 = 1.0 / ((nu + dd) * (nu + dd + 2.0));
    let (tci, tcj) = (trace(&ctx.sc_inv, &dci), trace(&ctx.sc_inv, &dcj));
    let (trk, trs) = (trace(&ctx.sr_inv, &drk), trace(&ctx.sr_inv, &drs));
    let (fd_c, fd_r) = (d_c as f64, d_r as f64);
    let closed = [
        k1,
        k1 * dd,
        k2 * nu * (nu + 2.0),
        k2 * (dd * trk * tci + 2.0 * trk * tci),
        k2 * (fd_r * fd_r * tci * tcj + 2.0 * fd_r * tr2(&ctx.sc_inv, &dci, &dcj)),
        k2 * (fd_c * fd_c * trk * trs + 2.0 * fd_c * tr2(&ctx.sr_inv, &drk, &drs)),
    ];
    let mc = tot.s.map(|v| v / nn);
    let d_mc = &tot.d / nn;
    let e_mc = &tot.e / nn;
    let d_cf = &big * k1;
    let e_cf = &big * k2;
    let rel = |est: f64, cf: f64| (est - cf).abs() / cf.abs();
    let estimates = [mc[0], mc[1], mc[2], d_mc.norm(), e_mc.norm(), mc[3], mc[4], mc[5]];
    let closed_forms = [closed[0], closed[1], closed[2], d_cf.norm(), e_cf.norm(), closed[3], closed[4], closed[5]];
    let rel_errors = [
        rel(mc[0], closed[0]),
        rel(mc[1], closed[1]),
        rel(mc[2], closed[2]),
        (&d_mc - &d_cf).norm() / d_cf.norm(),
        (&e_mc - &e_cf).norm() / e_cf.norm(),
        rel(mc[3], closed[3]),
        rel(mc[4], closed[4]),
        rel(mc[5], closed[5]),
    ];
    let names = layout.names();
    Ok(IdentityReport {
        estimates,
        closed_forms,
        rel_errors,
        indices: [names[i].clone(), names[j].clone(), names[k].clone(), names[s].clone()],
        samples: sample_count,
    })
}
