mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::{normal_matrix, random_model};
use tbfa::distributions::RngStream;
use tbfa::estimation::Algorithm;
use tbfa::model::ObsLabel;
use tbfa::simbench::*;

#[test]
fn generators_have_recipe_shapes_and_are_reproducible() {
    for (kind, dims) in [
        (GeneratorKind::BfaData1, (10, 10, 3, 3)),
        (GeneratorKind::BfaData2, (10, 10, 3, 3)),
        (GeneratorKind::TbfaAccuracy, (5, 5, 2, 2)),
    ] {
        let spec = GeneratorSpec::new(kind, 40);
        let (a, ta) = generate(&spec, &mut RngStream::new(9)).unwrap();
        let (b, tb) = generate(&spec, &mut RngStream::new(9)).unwrap();
        assert_eq!((a.d_c(), a.d_r(), ta.q_c(), ta.q_r()), dims);
        assert_eq!(a.n(), 40);
        assert_eq!(a.observations(), b.observations());
        assert_eq!(ta, tb);
    }
    let spec = GeneratorSpec::new(GeneratorKind::BfaData3, 3);
    let (d, t) = generate(&spec, &mut RngStream::new(0)).unwrap();
    assert_eq!((d.d_c(), d.d_r(), d.n()), (2000, 10, 3));
    assert!(t.gaussian);
}

#[test]
fn data1_loadings_are_scaled_orthonormal_columns() {
    let t = truth(&GeneratorSpec::new(GeneratorKind::BfaData1, 1), &mut RngStream::new(4)).unwrap();
    let g = t.c.transpose() * &t.c;
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 4.5, 4.0]));
    assert!((g - want).norm() < 1e-10);
    let g = t.r.transpose() * &t.r;
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 9.0, 8.0]));
    assert!((g - want).norm() < 1e-10);
    assert!((t.psi_c[0] - 0.5).abs() < 1e-15 && (t.psi_c[9] - 1.0).abs() < 1e-15);
    assert!((t.psi_r[0] - 1.0).abs() < 1e-15 && (t.psi_r[9] - 2.0).abs() < 1e-15);
}

#[test]
fn accuracy_data_are_heavy_tailed() {
    let spec = GeneratorSpec::new(GeneratorKind::TbfaAccuracy, 5000);
    let (d, _) = generate(&spec, &mut RngStream::new(2)).unwrap();
    let v: Vec<f64> = d.observations().iter().map(|x| x[(0, 0)]).collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    assert!(m4 / (m2 * m2) > 3.0, "kurtosis {}", m4 / (m2 * m2));
}

#[test]
fn outlier_count_matches_proportion() {
    let s = OutlierSpec::new(OutlierFamily::Fc, Situation::I, 0.05).unwrap();
    assert_eq!(s.count(1000), 53);
    assert_eq!(OutlierSpec::new(OutlierFamily::Oc, Situation::I, 0.0).unwrap().count(1000), 0);
    assert!(OutlierSpec::new(OutlierFamily::Oc, Situation::I, 0.5).is_err());
    assert_eq!("FC+OC:III:0.02".parse::<OutlierSpec>().unwrap().family, OutlierFamily::FcOc);
}

#[test]
fn orthogonal_complement_is_orthonormal_and_orthogonal() {
    let mut rng = RngStream::new(3);
    let a = normal_matrix(7, 3, &mut rng);
    let u = orthogonal_complement(&a);
    assert_eq!(u.shape(), (7, 4));
    assert!((u.transpose() * &u - DMatrix::identity(4, 4)).norm() < 1e-12);
    assert!((u.transpose() * &a).norm() < 1e-12 * a.norm());
}

fn mean_norm(xs: &[DMatrix<f64>], f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> f64 {
    xs.iter().map(|x| f(x).norm()).sum::<f64>() / xs.len() as f64
}

#[test]
fn contamination_lives_in_its_subspace() {
    let t = truth(&GeneratorSpec::new(GeneratorKind::BfaData1, 1), &mut RngStream::new(5)).unwrap();
    let (uc, ur) = (orthogonal_complement(&t.c), orthogonal_complement(&t.r));
    let clean = sample_from(&t, 300, &mut RngStream::new(6)).unwrap();
    let oc_proj = |x: &DMatrix<f64>| uc.transpose() * x * &ur;
    let fc_proj = |x: &DMatrix<f64>| t.c.transpose() * x * &t.r;
    let (clean_oc, clean_fc) = (mean_norm(clean.observations(), oc_proj), mean_norm(clean.observations(), fc_proj));

    let fc = contaminated_draws(&t, OutlierFamily::Fc, Situation::III, 300, &mut RngStream::new(7)).unwrap();
    let r = mean_norm(&fc, oc_proj) / clean_oc;
    assert!((0.8..1.25).contains(&r), "FC outliers leak into the complement: {r}");
    assert!(mean_norm(&fc, fc_proj) > 50.0 * clean_fc);

    let oc = contaminated_draws(&t, OutlierFamily::Oc, Situation::III, 300, &mut RngStream::new(7)).unwrap();
    let r = mean_norm(&oc, fc_proj) / clean_fc;
    assert!((0.8..1.25).contains(&r), "OC outliers leak into the factor space: {r}");
    assert!(mean_norm(&oc, oc_proj) > 50.0 * clean_oc);
}

#[test]
fn injected_outliers_are_appended_and_labelled() {
    let spec = GeneratorSpec::new(GeneratorKind::BfaData1, 200);
    let (clean, t) = generate(&spec, &mut RngStream::new(1)).unwrap();
    let o = OutlierSpec::new(OutlierFamily::FcOc, Situation::I, 0.09).unwrap();
    let d = inject_outliers(&clean, &t, &o, &mut RngStream::new(2)).unwrap();
    assert_eq!(d.n(), 200 + o.count(200));
    assert_eq!(&d.observations()[..200], clean.observations());
    let labels = d.labels_or_clean();
    assert!(labels[..200].iter().all(|l| *l == ObsLabel::Clean));
    assert!(labels[200..].iter().all(|l| *l == ObsLabel::Outlier));
}

#[test]
fn covariance_error_matches_dense_oracle() {
    let mut rng = RngStream::new(8);
    for _ in 0..10 {
        let a = random_model(6, 5, 2, 1, Some(5.0), &mut rng);
        let b = random_model(6, 5, 1, 2, Some(5.0), &mut rng);
        let (sa, sb) = (a.sigma_r().kronecker(&a.sigma_c()), b.sigma_r().kronecker(&b.sigma_c()));
        let want = (&sa - &sb).norm() / sa.norm();
        let got = rel_cov_error(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
        // a vectorized estimate is compared densely
        let v = random_model(30, 1, 3, 0, Some(5.0), &mut rng);
        let dense = v.sigma_c() * v.sigma_r()[(0, 0)];
        let want = (&sa - &dense).norm() / sa.norm();
        assert!((rel_cov_error(&a, &v).unwrap() - want).abs() < 1e-12 * want.max(1.0));
    }
    let a = random_model(6, 5, 1, 1, None, &mut rng);
    let wrong = random_model(5, 6, 1, 1, None, &mut rng);
    assert!(rel_cov_error(&a, &wrong).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn covariance_error_ignores_scale_transfer(seed in 0u64..1000, k in 0.1f64..10.0) {
        let mut rng = RngStream::new(seed);
        let a = random_model(5, 6, 1, 2, Some(4.0), &mut rng);
        let b = random_model(5, 6, 2, 1, Some(4.0), &mut rng);
        let mut moved = b.clone();
        moved.c *= k.sqrt();
        moved.psi_c *= k;
        moved.r /= k.sqrt();
        moved.psi_r /= k;
        let (e1, e2) = (rel_cov_error(&a, &b).unwrap(), rel_cov_error(&a, &moved).unwrap());
        prop_assert!((e1 - e2).abs() < 1e-9 * e1.max(1.0));
        // identical products: the expanded form leaves √ε residue
        prop_assert!(rel_cov_error(&b, &moved).unwrap() < 1e-6);
    }
}

#[test]
fn summary_statistics() {
    assert!((rmse(&[1.0, 3.0], 2.0) - 1.0).abs() < 1e-15);
    assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
    assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.0), 1.0);
}

#[test]
fn robustness_study_is_deterministic() {
    let cfg = RobustnessConfig {
        n: 150,
        proportions: vec![0.0, 0.05],
        families: vec![OutlierFamily::Fc],
        situations: vec![Situation::III],
        methods: vec![Method::Tbfa, Method::Bfa],
        reps: 2,
        t_max: 300,
        ..RobustnessConfig::default()
    };
    let a = robustness_study(&cfg).unwrap();
    let b = robustness_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4);
    for c in &a {
        assert_eq!(c.per_rep.len(), 2);
        assert_eq!(c.failures, 0);
        assert!((c.rel_error_x100 - 100.0 * c.rel_error).abs() < 1e-12);
    }
    let get = |m: Method, p: f64| a.iter().find(|c| c.method == m && c.p == p).unwrap().rel_error;
    assert!(get(Method::Tbfa, 0.05) < get(Method::Bfa, 0.05));
}

#[test]
fn accuracy_study_is_deterministic() {
    let cfg = AccuracyConfig { n_values: vec![200], reps: vec![3], t_max: 500, ..AccuracyConfig::default() };
    let a = accuracy_study(&cfg).unwrap();
    assert_eq!(a, accuracy_study(&cfg).unwrap());
    let t = &a[0];
    assert_eq!((t.n, t.reps, t.failures), (200, 3, 0));
    let k = t.index_of("nu").unwrap();
    assert_eq!(t.truth[k], 3.0);
    assert!(t.imse.iter().all(|v| v.is_finite() && *v > 0.0));
    assert_eq!(t.names.len(), t.rmse.len());
}

#[test]
fn convergence_study_shares_the_start() {
    let mut cfg = ConvergenceConfig::new(GeneratorKind::BfaData1);
    cfg.spec.n = 150;
    cfg.t_max = 200;
    let traces = convergence_study(&cfg).unwrap();
    assert_eq!(traces.len(), 4);
    assert_eq!(traces.iter().map(|t| t.algorithm).collect::<Vec<_>>(), Algorithm::ALL.to_vec());
    let l0 = traces[0].loglik[0];
    for t in &traces {
        assert_eq!(t.loglik.len(), t.seconds.len());
        assert_eq!(t.loglik.len(), t.iterations + 1);
        assert!((t.loglik[0] - l0).abs() < 1e-9 * l0.abs());
        assert!(t.loglik.last().unwrap() > &l0);
    }
}
