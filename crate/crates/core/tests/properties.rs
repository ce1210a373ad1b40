//! Property tests: CSV round-trips and the per-record evaluation oracle for
//! the design operators.

use nalgebra::DVector;
use posbias::{ComparisonDataset, ComparisonRecord, DesignOperators};
use proptest::prelude::*;

fn key_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_.-]{0,6}"
}

fn response_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(1.0),
        Just(-1.0),
        (-1e6f64..1e6).prop_filter("nonzero", |v| *v != 0.0),
    ]
}

fn record_strategy() -> impl Strategy<Value = ComparisonRecord> {
    (key_strategy(), key_strategy(), key_strategy(), response_strategy()).prop_filter_map(
        "distinct items",
        |(a, l, r, y)| {
            if l == r {
                None
            } else {
                Some(ComparisonRecord {
                    annotator: a,
                    left: l,
                    right: r,
                    response: y,
                })
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(records in prop::collection::vec(record_strategy(), 1..40)) {
        let ds = ComparisonDataset::from_records(records).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = ComparisonDataset::parse_csv(&buf[..]).unwrap();
        prop_assert_eq!(ds.edges(), back.edges());
        prop_assert_eq!(
            ds.items().keys().collect::<Vec<_>>(),
            back.items().keys().collect::<Vec<_>>()
        );
        prop_assert_eq!(
            ds.annotators().keys().collect::<Vec<_>>(),
            back.annotators().keys().collect::<Vec<_>>()
        );
    }

    #[test]
    fn operators_match_per_record_evaluation(
        records in prop::collection::vec(record_strategy(), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let ds = ComparisonDataset::from_records(records).unwrap();
        let ops = DesignOperators::from_dataset(&ds).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let theta = DVector::from_fn(ds.n_items(), |_, _| rng.random_range(-2.0..2.0));
        let gamma = DVector::from_fn(ds.n_annotators(), |_, _| rng.random_range(-2.0..2.0));
        let fitted = ops.apply_grad(&theta) + ops.apply_annot(&gamma);
        for (k, e) in ds.edges().iter().enumerate() {
            let expected = theta[e.left] - theta[e.right] + gamma[e.annotator];
            prop_assert!((fitted[k] - expected).abs() < 1e-12);
        }
    }
}
