//! Score, observed and expected information, standard errors and the
//! moment identities behind the expected information.

mod derivs;
mod fisher;
mod identities;
mod layout;

pub use derivs::{observed_hessian, score_contributions, score_vector};
pub use fisher::{fisher_information, invert_information, standard_errors, FisherInfo, StandardErrors};
pub use identities::{verify_expectation_identities, IdentityReport};
pub use layout::{Coord, FreeSet, ParamLayout, SideParam};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use crate::model::{identify_with, log_likelihood, MatrixDataset, TbfaParams, TriangularForm};
    use crate::simbench::{generate, sample_from, GeneratorKind, GeneratorSpec};
    use nalgebra::{DMatrix, DVector};

    fn small_truth(gaussian: bool) -> TbfaParams {
        let c = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.4, 0.8, -0.3, 0.5, 0.6, 0.2, 0.1, -0.7]);
        let r = DMatrix::from_row_slice(4, 1, &[0.7, -0.2, 0.5, 0.9]);
        let w = DMatrix::from_fn(5, 4, |i, j| 0.3 * i as f64 - 0.2 * j as f64);
        let psi_c = DVector::from_vec(vec![1.0, 0.6, 0.9, 0.4, 1.2]);
        let psi_r = DVector::from_vec(vec![0.5, 1.1, 0.7, 0.8]);
        if gaussian {
            TbfaParams::new_gaussian(w, c, psi_c, r, psi_r).unwrap()
        } else {
            TbfaParams::new(w, c, psi_c, r, psi_r, 5.0).unwrap()
        }
    }

    fn small_data(p: &TbfaParams, n: usize) -> MatrixDataset {
        // evaluate away from the truth so the score is not near zero
        let mut shifted = p.clone();
        shifted.w.add_scalar_mut(0.3);
        sample_from(&shifted, n, &mut RngStream::new(11)).unwrap()
    }

    fn fd_score(p: &TbfaParams, data: &MatrixDataset, layout: &ParamLayout) -> DVector<f64> {
        DVector::from_fn(layout.len(), |k, _| {
            let x = layout.value(p, k);
            let h = 1e-5 * x.abs().max(1.0);
            let up = log_likelihood(&layout.with_value(p, k, x + h), data).unwrap();
            let dn = log_likelihood(&layout.with_value(p, k, x - h), data).unwrap();
            (up - dn) / (2.0 * h)
        })
    }

    #[test]
    fn score_matches_finite_differences() {
        for gaussian in [false, true] {
            let p = small_truth(gaussian);
            let data = small_data(&p, 40);
            let layout = ParamLayout::new(&p, FreeSet::Full);
            let s = score_vector(&p, &data, FreeSet::Full).unwrap();
            let fd = fd_score(&p, &data, &layout);
            let err = (&s - &fd).amax() / fd.amax();
            assert!(err < 1e-6, "gaussian={gaussian} rel err {err}");
        }
    }

    #[test]
    fn hessian_matches_finite_differences_of_the_score() {
        for gaussian in [false, true] {
            let p = small_truth(gaussian);
            let data = small_data(&p, 40);
            let layout = ParamLayout::new(&p, FreeSet::Full);
            let h = observed_hessian(&p, &data, FreeSet::Full).unwrap();
            let np = layout.len();
            let mut fd = DMatrix::zeros(np, np);
            for k in 0..np {
                let x = layout.value(&p, k);
                let step = 1e-6 * x.abs().max(1.0);
                let up = score_vector(&layout.with_value(&p, k, x + step), &data, FreeSet::Full).unwrap();
                let dn = score_vector(&layout.with_value(&p, k, x - step), &data, FreeSet::Full).unwrap();
                fd.set_column(k, &((up - dn) / (2.0 * step)));
            }
            let err = (&h - &fd).amax() / fd.amax();
            assert!(err < 1e-6, "gaussian={gaussian} rel err {err}");
            assert!((&h - h.transpose()).amax() < 1e-12 * h.amax());
        }
    }

    #[test]
    fn mean_block_for_standard_sides() {
        // Σ_c = Σ_r = I, D = 4, ν = 5: (ν+D)/(ν+D+2) = 9/11
        let p = TbfaParams::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 0),
            DVector::from_element(2, 1.0),
            DMatrix::zeros(2, 0),
            DVector::from_element(2, 1.0),
            5.0,
        )
        .unwrap();
        let info = fisher_information(&p, 1, FreeSet::Full).unwrap();
        let mu = info.matrix.view((0, 0), (4, 4)).into_owned();
        assert!((mu - DMatrix::identity(4, 4) * (9.0 / 11.0)).amax() < 1e-14);
        assert!(info.matrix.view((0, 4), (4, info.matrix.ncols() - 4)).amax() == 0.0);
    }

    #[test]
    fn standard_errors_scale_with_root_n() {
        let p = small_truth(false);
        let free = FreeSet::default();
        let p = identify_with(&p, TriangularForm::Lower).params;
        let a = standard_errors(&p, 100, free).unwrap();
        let b = standard_errors(&p, 200, free).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x / y - 2f64.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn full_layout_information_is_singular() {
        let p = small_truth(false);
        let info = fisher_information(&p, 100, FreeSet::Full).unwrap();
        assert!(invert_information(&info).is_err());
    }

    #[test]
    fn nu_standard_error_at_the_accuracy_truth() {
        let spec = GeneratorSpec::new(GeneratorKind::TbfaAccuracy, 10);
        let (_, truth) = generate(&spec, &mut RngStream::new(0)).unwrap();
        let p = identify_with(&truth, TriangularForm::Reversed).params;
        let se = standard_errors(&p, 5000, FreeSet::Identified(TriangularForm::Reversed)).unwrap();
        let nu = se.get("nu").unwrap();
        assert!((nu - 0.0595).abs() < 0.002, "{nu}");
    }

    #[test]
    fn observed_information_tracks_expected_information() {
        let p = small_truth(false);
        let p = identify_with(&p, TriangularForm::Lower).params;
        let data = sample_from(&p, 20_000, &mut RngStream::new(5)).unwrap();
        let free = FreeSet::default();
        let h = observed_hessian(&p, &data, free).unwrap();
        let info = fisher_information(&p, data.n(), free).unwrap().matrix;
        let err = (&info + &h).amax() / info.amax();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn identities_hold_by_monte_carlo() {
        let p = small_truth(false);
        let r = verify_expectation_identities(&p, 100_000, &RngStream::new(3)).unwrap();
        for (k, e) in r.rel_errors.iter().enumerate() {
            assert!(*e < 0.05, "identity {k}: {e}");
        }
    }
}
