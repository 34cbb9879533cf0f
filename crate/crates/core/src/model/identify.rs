use nalgebra::DMatrix;

use super::TbfaParams;

/// Zero pattern imposed on the loadings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangularForm {
    /// c_ij = 0 for j > i, nonnegative diagonal.
    #[default]
    Lower,
    /// Lower form with the column order reversed, so the corner c_11 is the
    /// constrained entry when q = 2.
    Reversed,
}

impl std::str::FromStr for TriangularForm {
    type Err = crate::error::TbfaError;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lower" => Ok(Self::Lower),
            "reversed" => Ok(Self::Reversed),
            other => Err(crate::error::TbfaError::Config(format!("unknown triangular form '{other}'"))),
        }
    }
}

/// Result of identification.
#[derive(Debug, Clone, PartialEq)]
pub struct Identified {
    pub params: TbfaParams,
    /// Set when a loading matrix was rank deficient.
    pub degenerate: bool,
}

/// Rotates loadings to lower-triangular form and fixes ψ_{c,1} = 1.
pub fn identify(params: &TbfaParams) -> TbfaParams {
    identify_with(params, TriangularForm::Lower).params
}

pub fn identify_with(params: &TbfaParams, form: TriangularForm) -> Identified {
    let (c, dc) = triangularize(&params.c, form);
    let (r, dr) = triangularize(&params.r, form);
    let a = params.psi_c[0];
    let sa = a.sqrt();
    let out = TbfaParams {
        w: params.w.clone(),
        c: c / sa,
        psi_c: &params.psi_c / a,
        r: r * sa,
        psi_r: &params.psi_r * a,
        nu: params.nu,
        gaussian: params.gaussian,
    };
    Identified { params: out, degenerate: dc || dr }
}

fn triangularize(loading: &DMatrix<f64>, form: TriangularForm) -> (DMatrix<f64>, bool) {
    let (d, q) = loading.shape();
    if q == 0 {
        return (loading.clone(), false);
    }
    // Cᵀ = QR  ⇒  C Q = Rᵀ, lower trapezoidal
    let qr = loading.transpose().qr();
    let upper = qr.r();
    let mut l = DMatrix::zeros(d, q);
    for j in 0..q {
        for i in j..d {
            l[(i, j)] = upper[(j, i)];
        }
    }
    let scale = loading.norm().max(f64::MIN_POSITIVE);
    let mut degenerate = false;
    for j in 0..q {
        let diag = l[(j, j)];
        if diag.abs() <= 1e-10 * scale {
            degenerate = true;
            // pin the sign on the first clearly nonzero entry instead
            if let Some(v) = l.column(j).iter().find(|v| v.abs() > 1e-12 * scale).copied() {
                if v < 0.0 {
                    l.column_mut(j).neg_mut();
                }
            } else {
                l.column_mut(j).fill(0.0);
            }
        } else if diag < 0.0 {
            l.column_mut(j).neg_mut();
        }
    }
    if form == TriangularForm::Reversed {
        let rev = DMatrix::from_fn(d, q, |i, j| l[(i, q - 1 - j)]);
        return (rev, degenerate);
    }
    (l, degenerate)
}
