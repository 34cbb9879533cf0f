mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::random_model;
use tbfa::distributions::RngStream;
use tbfa::io::*;
use tbfa::model::MatrixDataset;
use tbfa::TbfaError;

fn dataset(n: usize, d_c: usize, d_r: usize, vals: &[f64]) -> MatrixDataset {
    let obs = (0..n)
        .map(|k| DMatrix::from_fn(d_c, d_r, |i, j| vals[(k * d_c * d_r + i * d_r + j) % vals.len()]))
        .collect();
    MatrixDataset::with_shape(d_c, d_r, obs).unwrap()
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn binary_round_trip_is_bit_exact(
        n in 1usize..6, d_c in 1usize..5, d_r in 1usize..5,
        vals in prop::collection::vec(value(), 1..40),
    ) {
        let d = dataset(n, d_c, d_r, &vals);
        let bytes = write_mds_binary(&d);
        let back = read_mds(&bytes).unwrap();
        prop_assert_eq!((back.n(), back.d_c(), back.d_r()), (n, d_c, d_r));
        for (a, b) in d.observations().iter().zip(back.observations()) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact(
        n in 1usize..6, d_c in 1usize..5, d_r in 1usize..5,
        vals in prop::collection::vec(value(), 1..40),
    ) {
        let d = dataset(n, d_c, d_r, &vals);
        let back = read_mds(write_mds_text(&d).as_bytes()).unwrap();
        prop_assert_eq!(back.observations(), d.observations());
    }
}

#[test]
fn text_layout_is_row_major_per_observation() {
    let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
    let d = MatrixDataset::new(vec![x]).unwrap();
    assert_eq!(write_mds_text(&d), "MDS1 1 2 3\n1 2 3\n4 5 6.5\n");
    let b = write_mds_binary(&d);
    assert_eq!(&b[..4], b"MDSB");
    assert_eq!(b.len(), 28 + 6 * 8);
    assert_eq!(f64::from_le_bytes(b[28 + 8..28 + 16].try_into().unwrap()), 2.0);
}

#[test]
fn malformed_text_reports_the_line() {
    let bad = "MDS1 2 2 2\n1 2\n3 x\n5 6\n7 8\n";
    match read_mds(bad.as_bytes()) {
        Err(TbfaError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(read_mds(b"MDS1 2 2 2\n1 2\n3 4\n").is_err());
    assert!(read_mds(b"MDS1 1 2 2\n1 2 3\n3 4\n").is_err());
    assert!(read_mds(b"MDX 1 1 1\n1\n").is_err());
    assert!(read_mds(b"").is_err());
}

#[test]
fn truncated_binary_is_rejected() {
    let d = dataset(3, 2, 2, &[1.0, 2.0, 3.0]);
    let b = write_mds_binary(&d);
    assert!(read_mds(&b[..b.len() - 1]).is_err());
    assert!(read_mds(&b[..20]).is_err());
}

#[test]
fn params_round_trip() {
    let mut rng = RngStream::new(11);
    for nu in [Some(3.7), None] {
        let p = random_model(6, 5, 2, 1, nu, &mut rng);
        let back = read_params(&write_params(&p)).unwrap();
        assert_eq!(back, p);
    }
    let p = random_model(6, 5, 0, 2, Some(12.0), &mut rng);
    assert_eq!(read_params(&write_params(&p)).unwrap(), p);
    assert!(read_params("TBFA-PARAMS 2\n").is_err());
}
