//! Block-layout helpers shared by the estimators and the likelihood.
//!
//! A "stack" holds N matrices of shape p×q side by side as a p × (N·q) matrix.

use nalgebra::{DMatrix, DVector};

/// Converts a stack of N p×q blocks into the stack of their transposes (q × N·p).
pub fn block_transpose(h: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let p = h.nrows();
    let q = if n == 0 { 0 } else { h.ncols() / n };
    let mut out = DMatrix::zeros(q, n * p);
    for b in 0..n {
        for i in 0..p {
            let mut col = out.column_mut(b * p + i);
            for j in 0..q {
                col[j] = h[(i, b * q + j)];
            }
        }
    }
    out
}

/// Scales every column of block `b` (width `q`) by `w[b]`.
pub fn scale_blocks(h: &DMatrix<f64>, w: &[f64], q: usize) -> DMatrix<f64> {
    let mut out = h.clone();
    for (b, &wb) in w.iter().enumerate() {
        for j in 0..q {
            out.column_mut(b * q + j).scale_mut(wb);
        }
    }
    out
}

/// Σ_b ⟨A_b, B_b⟩ per block; blocks are contiguous column ranges of width `q`.
pub fn block_dots(a: &DMatrix<f64>, b: &DMatrix<f64>, q: usize) -> Vec<f64> {
    let n = if q == 0 { 0 } else { a.ncols() / q };
    let len = a.nrows() * q;
    let (sa, sb) = (a.as_slice(), b.as_slice());
    (0..n)
        .map(|k| {
            let r = k * len..(k + 1) * len;
            sa[r.clone()].iter().zip(&sb[r]).map(|(x, y)| x * y).sum()
        })
        .collect()
}

/// Subtracts `w` from every block of the stack.
pub fn center_stack(x: &DMatrix<f64>, w: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let q = w.ncols();
    let mut out = x.clone();
    for b in 0..n {
        let mut blk = out.columns_mut(b * q, q);
        blk -= w;
    }
    out
}

/// Weighted average of the blocks.
pub fn weighted_block_mean(x: &DMatrix<f64>, w: &[f64], q: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(x.nrows(), q);
    let mut total = 0.0;
    for (b, &wb) in w.iter().enumerate() {
        acc += x.columns(b * q, q) * wb;
        total += wb;
    }
    acc / total
}

/// a bᵀ.
pub fn mul_bt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.nrows());
    out.gemm(1.0, a, &b.transpose(), 0.0);
    out
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Row-wise Σ_j a_ij b_ij.
pub fn row_dots(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for j in 0..a.ncols() {
        let (ca, cb) = (a.column(j), b.column(j));
        for i in 0..a.nrows() {
            out[i] += ca[i] * cb[i];
        }
    }
    out
}
