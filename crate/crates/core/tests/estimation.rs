mod common;

use proptest::prelude::*;

use common::random_model;
use tbfa::distributions::RngStream;
use tbfa::estimation::{fit, fit_best_of, fit_with_probe, initialize, Algorithm, FitConfig, Init, Stage};
use tbfa::model::{identify, identify_with, log_likelihood, MatrixDataset, TbfaParams, TriangularForm};
use tbfa::simbench::{generate, rel_cov_error, sample_from, GeneratorKind, GeneratorSpec};
use tbfa::TbfaError;

fn data1(n: usize, nu: Option<f64>, seed: u64) -> (MatrixDataset, TbfaParams) {
    let mut spec = GeneratorSpec::new(GeneratorKind::BfaData1, n);
    if let Some(nu) = nu {
        spec = spec.with_nu(nu);
    }
    generate(&spec, &mut RngStream::new(seed)).unwrap()
}

fn non_decreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - 1e-7 * w[0].abs())
}

#[test]
fn every_algorithm_ascends_and_they_agree() {
    for seed in 0..2 {
        let (data, _) = data1(200, Some(5.0), seed);
        let base = FitConfig { tol: 1e-10, t_max: 5000, ..FitConfig::default() };
        let init = initialize(&data, 3, 3, &base, &mut RngStream::new(seed + 100)).unwrap();
        let lls: Vec<f64> = Algorithm::ALL
            .iter()
            .map(|&algorithm| {
                let cfg = FitConfig { algorithm, init: Init::Given(init.clone()), ..base.clone() };
                let r = fit(&data, 3, 3, &cfg).unwrap();
                assert!(r.converged, "{algorithm}");
                assert!(non_decreasing(&r.loglik_trace), "{algorithm}");
                r.loglik()
            })
            .collect();
        for l in &lls {
            assert!((l - lls[0]).abs() / lls[0].abs() < 1e-4, "{lls:?}");
        }
    }
}

/// Log-likelihood after every conditional step, grouped by iteration.
fn stage_paths(data: &MatrixDataset, algorithm: Algorithm, init: &TbfaParams) -> (Vec<f64>, Vec<Vec<(Stage, f64)>>) {
    let mut iters: Vec<Vec<(Stage, f64)>> = Vec::new();
    let mut probe = |stage: Stage, p: &TbfaParams| {
        if stage == Stage::First {
            iters.push(Vec::new());
        }
        iters.last_mut().unwrap().push((stage, log_likelihood(p, data).unwrap()));
    };
    let cfg = FitConfig { algorithm, init: Init::Given(init.clone()), t_max: 60, tol: 1e-12, ..FitConfig::default() };
    let r = fit_with_probe(data, 3, 3, &cfg, Some(&mut probe)).unwrap();
    (r.loglik_trace, iters)
}

#[test]
fn no_conditional_step_falls_below_the_iteration_start() {
    let (data, _) = data1(150, Some(4.0), 9);
    let init = initialize(&data, 3, 3, &FitConfig::default(), &mut RngStream::new(1)).unwrap();
    for algorithm in Algorithm::ALL {
        let (trace, iters) = stage_paths(&data, algorithm, &init);
        assert_eq!(iters.len(), trace.len() - 1);
        for (t, stages) in iters.iter().enumerate() {
            for &(stage, l) in stages {
                assert!(l >= trace[t] - 1e-7 * trace[t].abs(), "{algorithm} iteration {t} {stage:?}: {l} < {}", trace[t]);
            }
        }
    }
}

#[test]
fn alternating_cycles_ascend_step_by_step() {
    let (data, _) = data1(150, Some(4.0), 10);
    let init = initialize(&data, 3, 3, &FitConfig::default(), &mut RngStream::new(2)).unwrap();
    for algorithm in [Algorithm::Aecm, Algorithm::PxAecm] {
        let (trace, iters) = stage_paths(&data, algorithm, &init);
        let mut prev = trace[0];
        for stages in &iters {
            for &(stage, l) in stages {
                assert!(l >= prev - 1e-7 * prev.abs(), "{algorithm} {stage:?}");
                prev = l;
            }
        }
    }
}

#[test]
fn large_sample_recovers_the_covariance() {
    let (data, truth) = data1(3000, Some(6.0), 3);
    let r = fit(&data, 3, 3, &FitConfig::with_algorithm(Algorithm::PxEcme)).unwrap();
    assert!(r.converged);
    assert!(rel_cov_error(&truth, &r.params).unwrap() < 0.05);
    assert!((r.params.nu - 6.0).abs() < 1.0, "nu {}", r.params.nu);
}

#[test]
fn gaussian_mode_keeps_unit_weights() {
    let (data, _) = data1(200, None, 4);
    let cfg = FitConfig { gaussian: true, algorithm: Algorithm::Aecm, ..FitConfig::default() };
    let r = fit(&data, 2, 2, &cfg).unwrap();
    assert!(r.params.gaussian && r.params.nu.is_infinite());
    assert!(r.final_tau.iter().all(|&t| t == 1.0));
    assert!(non_decreasing(&r.loglik_trace));
}

#[test]
fn fitted_parameters_are_identified() {
    let (data, _) = data1(200, Some(5.0), 5);
    for form in [TriangularForm::Lower, TriangularForm::Reversed] {
        let r = fit(&data, 3, 3, &FitConfig { form, ..FitConfig::default() }).unwrap();
        assert_eq!(r.params.psi_c[0], 1.0);
        let again = identify_with(&r.params, form).params;
        assert!((&again.c - &r.params.c).amax() < 1e-10);
        assert!((&again.r - &r.params.r).amax() < 1e-10);
        assert!((log_likelihood(&r.params, &data).unwrap() - r.loglik()).abs() < 1e-6 * r.loglik().abs());
    }
}

#[test]
fn best_of_restarts_is_at_least_each_start() {
    let (data, _) = data1(150, Some(5.0), 6);
    let cfg = FitConfig { seed: 10, ..FitConfig::default() };
    let best = fit_best_of(&data, 2, 2, &cfg, 3).unwrap();
    for k in 0..3 {
        let r = fit(&data, 2, 2, &FitConfig { seed: 10 + k, ..cfg.clone() }).unwrap();
        assert!(best.loglik() >= r.loglik());
    }
}

#[test]
fn fits_are_deterministic_per_seed() {
    let (data, _) = data1(100, Some(5.0), 7);
    let cfg = FitConfig { seed: 3, algorithm: Algorithm::PxAecm, ..FitConfig::default() };
    let a = fit(&data, 2, 3, &cfg).unwrap();
    let b = fit(&data, 2, 3, &cfg).unwrap();
    assert_eq!(a.loglik_trace, b.loglik_trace);
    assert_eq!(a.params, b.params);
}

#[test]
fn invalid_requests_are_rejected() {
    let (data, truth) = data1(50, None, 8);
    assert!(matches!(fit(&data, 7, 1, &FitConfig::default()), Err(TbfaError::Dimension(_))));
    let bad_tol = FitConfig { tol: 0.0, ..FitConfig::default() };
    assert!(matches!(fit(&data, 1, 1, &bad_tol), Err(TbfaError::Config(_))));
    let wrong_shape = FitConfig { init: Init::Given(truth), ..FitConfig::default() };
    assert!(matches!(fit(&data, 2, 2, &wrong_shape), Err(TbfaError::Config(_))));
    let empty = MatrixDataset::with_shape(10, 10, Vec::new()).unwrap();
    assert!(matches!(fit(&empty, 1, 1, &FitConfig::default()), Err(TbfaError::EmptyData)));
}

#[test]
fn iteration_limit_is_reported() {
    let (data, _) = data1(100, None, 9);
    let r = fit(&data, 3, 3, &FitConfig { t_max: 2, ..FitConfig::default() }).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 2);
    assert_eq!(r.loglik_trace.len(), 3);
}

#[test]
fn zero_factor_model_fits_separable_noise() {
    let mut rng = RngStream::new(11);
    let truth = random_model(4, 3, 0, 0, Some(5.0), &mut rng);
    let data = sample_from(&truth, 400, &mut rng).unwrap();
    let r = fit(&data, 0, 0, &FitConfig::default()).unwrap();
    assert!(r.converged);
    assert!(rel_cov_error(&truth, &r.params).unwrap() < 0.25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identification_preserves_the_likelihood(seed in 0u64..10_000) {
        let mut rng = RngStream::new(seed);
        let p = random_model(5, 4, 2, 1, Some(4.0), &mut rng);
        let data = sample_from(&p, 20, &mut rng).unwrap();
        let a = log_likelihood(&p, &data).unwrap();
        for q in [identify(&p), identify_with(&p, TriangularForm::Reversed).params] {
            let b = log_likelihood(&q, &data).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs());
            prop_assert_eq!(q.psi_c[0], 1.0);
        }
    }
}
