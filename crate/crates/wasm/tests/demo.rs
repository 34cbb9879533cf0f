use serde_json::Value;
use tbfa_wasm::{fit_mds, outlier_report, simulate_mds};

#[test]
fn simulate_then_fit_round_trip() {
    let text = simulate_mds("accuracy", 200, 4, 0.0, "").unwrap();
    assert!(text.starts_with("MDS1 200 5 5\n"));
    let v: Value = serde_json::from_str(&fit_mds(&text, 2, 2, false, 1).unwrap()).unwrap();
    assert_eq!(v["tau"].as_array().unwrap().len(), 200);
    let trace: Vec<f64> = v["loglik_trace"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-7 * w[0].abs()));
    assert!(v["nu"].as_f64().unwrap() > 1.0);
}

#[test]
fn gaussian_fit_reports_no_nu() {
    let text = simulate_mds("data1", 60, 0, 0.0, "").unwrap();
    let v: Value = serde_json::from_str(&fit_mds(&text, 1, 1, true, 0).unwrap()).unwrap();
    assert!(v["nu"].is_null());
}

#[test]
fn contamination_flags_outliers() {
    let text = simulate_mds("data1", 100, 0, 0.0, "FC:I:0.05").unwrap();
    assert!(text.starts_with("MDS1 105 10 10\n"));
    let v: Value = serde_json::from_str(&outlier_report(200, 0.05, 2).unwrap()).unwrap();
    assert_eq!(v["n_outliers"], 11);
    assert!(v["mean_tau_outliers"].as_f64().unwrap() < v["tau_clean_p10"].as_f64().unwrap());
    assert!(v["t_error"].as_f64().unwrap() < v["gaussian_error"].as_f64().unwrap());
}

#[test]
fn bad_input_is_an_error() {
    assert!(simulate_mds("data9", 10, 0, 0.0, "").is_err());
    assert!(simulate_mds("data1", 10, 0, 0.0, "XX:I:0.1").is_err());
    assert!(fit_mds("MDS1 1 2", 1, 1, false, 0).is_err());
    assert!(fit_mds(&simulate_mds("data1", 20, 0, 0.0, "").unwrap(), 7, 1, false, 0).is_err());
}
