use nalgebra::DMatrix;
use std::ops::Range;

use crate::model::{TbfaParams, TriangularForm};

/// Which coordinates count as free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeSet {
    /// Triangular zero pattern of the given form plus ψ_{c,1} = 1.
    Identified(TriangularForm),
    /// Every entry of W, C, Ψ_c, R, Ψ_r and ν.
    Full,
}

impl Default for FreeSet {
    fn default() -> Self {
        FreeSet::Identified(TriangularForm::Lower)
    }
}

/// A coordinate of one covariance side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideParam {
    Loading { row: usize, col: usize },
    Psi(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Mean { row: usize, col: usize },
    Col(SideParam),
    Row(SideParam),
    Nu,
}

/// Ordered free coordinates: vec(W) column-major, column side, row side, ν.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    coords: Vec<Coord>,
    names: Vec<String>,
    mean: Range<usize>,
    col: Range<usize>,
    row: Range<usize>,
    nu: Option<usize>,
}

fn loading_free(i: usize, j: usize, q: usize, free: FreeSet) -> bool {
    match free {
        FreeSet::Full => true,
        FreeSet::Identified(TriangularForm::Lower) => i >= j,
        FreeSet::Identified(TriangularForm::Reversed) => i + j + 1 >= q,
    }
}

fn index_name(prefix: &str, i: usize, j: usize) -> String {
    if i < 9 && j < 9 {
        format!("{prefix}{}{}", i + 1, j + 1)
    } else {
        format!("{prefix}[{},{}]", i + 1, j + 1)
    }
}

fn side_coords(loading: &DMatrix<f64>, skip_first_psi: bool, free: FreeSet) -> Vec<SideParam> {
    let (d, q) = loading.shape();
    let mut out = Vec::new();
    for j in 0..q {
        for i in 0..d {
            if loading_free(i, j, q, free) {
                out.push(SideParam::Loading { row: i, col: j });
            }
        }
    }
    let start = usize::from(skip_first_psi);
    out.extend((start..d).map(SideParam::Psi));
    out
}

impl ParamLayout {
    pub fn new(params: &TbfaParams, free: FreeSet) -> Self {
        let (d_c, d_r) = (params.d_c(), params.d_r());
        let mut coords = Vec::new();
        let mut names = Vec::new();
        for j in 0..d_r {
            for i in 0..d_c {
                coords.push(Coord::Mean { row: i, col: j });
                names.push(format!("w[{},{}]", i + 1, j + 1));
            }
        }
        let mean = 0..coords.len();
        let identified = matches!(free, FreeSet::Identified(_));
        for p in side_coords(&params.c, identified, free) {
            coords.push(Coord::Col(p));
            names.push(match p {
                SideParam::Loading { row, col } => index_name("c", row, col),
                SideParam::Psi(i) => format!("psi_c{}", i + 1),
            });
        }
        let col = mean.end..coords.len();
        for p in side_coords(&params.r, false, free) {
            coords.push(Coord::Row(p));
            names.push(match p {
                SideParam::Loading { row, col } => index_name("r", row, col),
                SideParam::Psi(i) => format!("psi_r{}", i + 1),
            });
        }
        let row = col.end..coords.len();
        let nu = (!params.gaussian).then(|| {
            coords.push(Coord::Nu);
            names.push("nu".into());
            coords.len() - 1
        });
        Self { coords, names, mean, col, row, nu }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean_range(&self) -> Range<usize> {
        self.mean.clone()
    }

    pub fn col_range(&self) -> Range<usize> {
        self.col.clone()
    }

    pub fn row_range(&self) -> Range<usize> {
        self.row.clone()
    }

    pub fn nu_index(&self) -> Option<usize> {
        self.nu
    }

    /// Position of a named coordinate.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Value of coordinate `k` in `params`.
    pub fn value(&self, params: &TbfaParams, k: usize) -> f64 {
        match self.coords[k] {
            Coord::Mean { row, col } => params.w[(row, col)],
            Coord::Col(SideParam::Loading { row, col }) => params.c[(row, col)],
            Coord::Col(SideParam::Psi(i)) => params.psi_c[i],
            Coord::Row(SideParam::Loading { row, col }) => params.r[(row, col)],
            Coord::Row(SideParam::Psi(i)) => params.psi_r[i],
            Coord::Nu => params.nu,
        }
    }

    /// All coordinate values in layout order.
    pub fn values(&self, params: &TbfaParams) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(params, k)).collect()
    }

    /// Copy of `params` with coordinate `k` set to `v`.
    pub fn with_value(&self, params: &TbfaParams, k: usize, v: f64) -> TbfaParams {
        let mut p = params.clone();
        match self.coords[k] {
            Coord::Mean { row, col } => p.w[(row, col)] = v,
            Coord::Col(SideParam::Loading { row, col }) => p.c[(row, col)] = v,
            Coord::Col(SideParam::Psi(i)) => p.psi_c[i] = v,
            Coord::Row(SideParam::Loading { row, col }) => p.r[(row, col)] = v,
            Coord::Row(SideParam::Psi(i)) => p.psi_r[i] = v,
            Coord::Nu => p.nu = v,
        }
        p
    }
}

/// ∂Σ/∂θ for one side coordinate, as a dense matrix.
pub(crate) fn sigma_dot(loading: &DMatrix<f64>, p: SideParam) -> DMatrix<f64> {
    let d = loading.nrows();
    let mut s = DMatrix::zeros(d, d);
    match p {
        SideParam::Loading { row, col } => {
            for k in 0..d {
                s[(row, k)] += loading[(k, col)];
                s[(k, row)] += loading[(k, col)];
            }
        }
        SideParam::Psi(i) => s[(i, i)] = 1.0,
    }
    s
}

/// ⟨M, ∂Σ/∂θ⟩ for symmetric `m`.
pub(crate) fn inner_dot(m: &DMatrix<f64>, loading: &DMatrix<f64>, p: SideParam) -> f64 {
    match p {
        SideParam::Loading { row, col } => 2.0 * m.row(row).transpose().dot(&loading.column(col)),
        SideParam::Psi(i) => m[(i, i)],
    }
}

/// ⟨M, ∂²Σ/∂θ_a∂θ_b⟩ for symmetric `m`; nonzero only for two loadings in one column.
pub(crate) fn inner_ddot(m: &DMatrix<f64>, a: SideParam, b: SideParam) -> f64 {
    match (a, b) {
        (SideParam::Loading { row: i, col: j }, SideParam::Loading { row: k, col: l }) if j == l => {
            2.0 * m[(i, k)]
        }
        _ => 0.0,
    }
}
