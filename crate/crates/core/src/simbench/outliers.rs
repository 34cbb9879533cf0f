use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::distributions::RngStream;
use crate::error::{Result, TbfaError};
use crate::model::{MatrixDataset, ObsLabel, TbfaParams};

use super::generate::sample_from;

/// Subspace in which the contamination lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutlierFamily {
    /// Factor-component subspace only.
    Fc,
    /// Orthogonal complement only.
    Oc,
    /// Both.
    FcOc,
}

/// Uniform range of the contaminating factor entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    I,
    II,
    III,
    IV,
}

impl Situation {
    pub fn range(self) -> (f64, f64) {
        match self {
            Situation::I => (-100.0, 100.0),
            Situation::II => (-1e4, 1e4),
            Situation::III => (100.0, 110.0),
            Situation::IV => (1e4, 1.1e4),
        }
    }
}

impl fmt::Display for OutlierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutlierFamily::Fc => "FC",
            OutlierFamily::Oc => "OC",
            OutlierFamily::FcOc => "FC+OC",
        })
    }
}

impl FromStr for OutlierFamily {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "+").as_str() {
            "FC" => Ok(Self::Fc),
            "OC" => Ok(Self::Oc),
            "FC+OC" | "FCOC" => Ok(Self::FcOc),
            other => Err(TbfaError::Config(format!("unknown outlier family '{other}'"))),
        }
    }
}

impl fmt::Display for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Situation::I => "I",
            Situation::II => "II",
            Situation::III => "III",
            Situation::IV => "IV",
        })
    }
}

impl FromStr for Situation {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::I),
            "II" | "2" => Ok(Self::II),
            "III" | "3" => Ok(Self::III),
            "IV" | "4" => Ok(Self::IV),
            other => Err(TbfaError::Config(format!("unknown situation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub family: OutlierFamily,
    pub situation: Situation,
    /// Target outlier share of the combined set, in [0, 0.5).
    pub proportion: f64,
}

impl OutlierSpec {
    pub fn new(family: OutlierFamily, situation: Situation, proportion: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&proportion) {
            return Err(TbfaError::Config(format!("outlier proportion {proportion} not in [0, 0.5)")));
        }
        Ok(Self { family, situation, proportion })
    }

    /// Number of outliers appended to `n` clean observations.
    pub fn count(&self, n: usize) -> usize {
        (n as f64 * self.proportion / (1.0 - self.proportion)).round() as usize
    }
}

/// Parses `family:situation:p`, e.g. `FC:I:0.05`.
impl FromStr for OutlierSpec {
    type Err = TbfaError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(TbfaError::Config(format!("expected family:situation:p, got '{s}'")));
        }
        let p: f64 = parts[2]
            .parse()
            .map_err(|_| TbfaError::Config(format!("bad proportion '{}'", parts[2])))?;
        OutlierSpec::new(parts[0].parse()?, parts[1].parse()?, p)
    }
}

/// Orthonormal basis of the orthogonal complement of span(a).
pub fn orthogonal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, q) = a.shape();
    if q == 0 {
        return DMatrix::identity(d, d);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    // complete the basis by projecting the canonical vectors out
    let mut basis: Vec<nalgebra::DVector<f64>> = (0..q).map(|j| u.column(j).into_owned()).collect();
    let k = basis.len();
    for e in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = nalgebra::DVector::zeros(d);
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let dot = b.dot(&v);
                v -= b * dot;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_columns(&basis[k..])
}

/// Mixing matrices (C_o, R_o) and the nonzero block of Z_o for a family.
struct Design {
    c_o: DMatrix<f64>,
    r_o: DMatrix<f64>,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
}

fn design(truth: &TbfaParams, family: OutlierFamily) -> Design {
    let (d_c, d_r) = (truth.d_c(), truth.d_r());
    let (q_c, q_r) = (truth.q_c(), truth.q_r());
    let c_oc = orthogonal_complement(&truth.c);
    let r_oc = orthogonal_complement(&truth.r);
    let join = |fc: &DMatrix<f64>, oc: &DMatrix<f64>, use_fc: bool, use_oc: bool| {
        let d = fc.nrows();
        let mut m = DMatrix::zeros(d, d);
        if use_fc {
            m.columns_mut(0, fc.ncols()).copy_from(fc);
        }
        if use_oc {
            m.columns_mut(fc.ncols(), oc.ncols()).copy_from(oc);
        }
        m
    };
    let (fc, oc) = match family {
        OutlierFamily::Fc => (true, false),
        OutlierFamily::Oc => (false, true),
        OutlierFamily::FcOc => (true, true),
    };
    let (rows, cols) = match family {
        OutlierFamily::Fc => (0..q_c, 0..q_r),
        OutlierFamily::Oc => (q_c..d_c, q_r..d_r),
        OutlierFamily::FcOc => (0..d_c, 0..d_r),
    };
    Design { c_o: join(&truth.c, &c_oc, fc, oc), r_o: join(&truth.r, &r_oc, fc, oc), rows, cols }
}

/// Draws `count` contaminated observations W + clean noise + C_o Z_o R_oᵀ.
pub fn contaminated_draws(
    truth: &TbfaParams,
    family: OutlierFamily,
    situation: Situation,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<DMatrix<f64>>> {
    let d = design(truth, family);
    let (lo, hi) = situation.range();
    let base = sample_from(&clean_model(truth), count, rng)?;
    let mut out = Vec::with_capacity(count);
    for x in base.observations() {
        let mut z = DMatrix::zeros(truth.d_c(), truth.d_r());
        for i in d.rows.clone() {
            for j in d.cols.clone() {
                z[(i, j)] = rng.random_range(lo..hi);
            }
        }
        out.push(x + &d.c_o * z * d.r_o.transpose());
    }
    Ok(out)
}

// contamination is added to a Gaussian bilinear draw
fn clean_model(truth: &TbfaParams) -> TbfaParams {
    TbfaParams { nu: f64::INFINITY, gaussian: true, ..truth.clone() }
}

/// Appends round(N·p/(1−p)) outliers labelled as such.
pub fn inject_outliers(
    data: &MatrixDataset,
    truth: &TbfaParams,
    spec: &OutlierSpec,
    rng: &mut RngStream,
) -> Result<MatrixDataset> {
    if truth.d_c() != data.d_c() || truth.d_r() != data.d_r() {
        return Err(TbfaError::Dimension("truth and data shapes differ".into()));
    }
    let mut out = data.clone();
    let count = spec.count(data.n());
    if count == 0 {
        return Ok(out);
    }
    let extra = contaminated_draws(truth, spec.family, spec.situation, count, rng)?;
    out.extend(extra, ObsLabel::Outlier)?;
    Ok(out)
}
