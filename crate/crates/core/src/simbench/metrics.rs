use nalgebra::DMatrix;

use crate::error::{Result, TbfaError};
use crate::model::TbfaParams;

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// ‖Σ − Σ̂‖_F / ‖Σ‖_F with Σ = Σ_r ⊗ Σ_c.
///
/// `est` is either bilinear with the same shape as `truth`, or a vector model
/// fitted to column-major vectorized data (d_c·d_r × 1).
pub fn rel_cov_error(truth: &TbfaParams, est: &TbfaParams) -> Result<f64> {
    let (sc, sr) = (truth.sigma_c(), truth.sigma_r());
    if est.d_c() == truth.d_c() && est.d_r() == truth.d_r() {
        return Ok(kron_rel_error(&sc, &sr, &est.sigma_c(), &est.sigma_r()));
    }
    let d = truth.d_c() * truth.d_r();
    if est.d_c() == d && est.d_r() == 1 {
        let hat = est.sigma_c() * est.sigma_r()[(0, 0)];
        return Ok(dense_rel_error(&sc, &sr, &hat));
    }
    Err(TbfaError::Dimension(format!(
        "estimate is {}x{}, truth is {}x{}",
        est.d_c(),
        est.d_r(),
        truth.d_c(),
        truth.d_r()
    )))
}

/// Relative Frobenius distance between Σ_r⊗Σ_c and Σ̂_r⊗Σ̂_c without forming
/// either product.
pub fn kron_rel_error(
    sc: &DMatrix<f64>,
    sr: &DMatrix<f64>,
    sc_hat: &DMatrix<f64>,
    sr_hat: &DMatrix<f64>,
) -> f64 {
    // A⊗B − Â⊗B̂ = (A−Â)⊗B + Â⊗(B−B̂)
    let da = sr - sr_hat;
    let db = sc - sc_hat;
    let num = dot(&da, &da) * dot(sc, sc)
        + dot(sr_hat, sr_hat) * dot(&db, &db)
        + 2.0 * dot(&da, sr_hat) * dot(sc, &db);
    let den = dot(sr, sr) * dot(sc, sc);
    (num.max(0.0) / den).sqrt()
}

/// Relative Frobenius distance between Σ_r⊗Σ_c and a dense estimate.
pub fn dense_rel_error(sc: &DMatrix<f64>, sr: &DMatrix<f64>, hat: &DMatrix<f64>) -> f64 {
    let sigma = sr.kronecker(sc);
    (&sigma - hat).norm() / sigma.norm()
}

/// Root mean square deviation of `values` from `target`.
pub fn rmse(values: &[f64], target: f64) -> f64 {
    (values.iter().map(|v| (v - target).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Empirical quantile with linear interpolation, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use crate::simbench::{truth, GeneratorKind, GeneratorSpec};

    #[test]
    fn identical_is_zero_and_doubling_is_one() {
        let mut rng = RngStream::new(5);
        let t = truth(&GeneratorSpec::new(GeneratorKind::BfaData1, 1), &mut rng).unwrap();
        assert_eq!(rel_cov_error(&t, &t).unwrap(), 0.0);
        let mut d = t.clone();
        d.c *= 2f64.sqrt();
        d.psi_c *= 2.0;
        assert!((rel_cov_error(&t, &d).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[1.0, 3.0], 2.0) - 1.0).abs() < 1e-15);
    }
}
