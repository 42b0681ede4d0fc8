mod common;

use common::brute_force_split;
use edemarad::gbdt::{find_best_split, grid_search, train, train_with_history, Dataset, HyperParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dyadic values keep every partial sum exact, so equal gains compare equal
/// in both searches and tie-breaking is exercised.
fn dyadic(rng: &mut impl Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.gen_range(lo..=hi)) / 8.0
}

fn random_dataset(rng: &mut impl Rng, n: usize, nf: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..nf).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let w: Vec<f64> = (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut labels: Vec<u8> = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            u8::from(s + rng.gen_range(-0.5..0.5) > 0.0)
        })
        .collect();
    labels[0] = 0;
    labels[1] = 1;
    Dataset::new((0..nf).map(|f| format!("f{f}")).collect(), rows, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn split_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=64);
        let nf = rng.gen_range(1..=8);
        let levels = rng.gen_range(1..=10);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..nf).map(|_| f64::from(rng.gen_range(0..levels))).collect()).collect();
        let g: Vec<f64> = (0..n).map(|_| dyadic(&mut rng, -8, 8)).collect();
        let h: Vec<f64> = (0..n).map(|_| dyadic(&mut rng, 1, 8)).collect();
        let hp = HyperParams {
            l2_lambda: f64::from(rng.gen_range(0..3)),
            gamma_min_gain: [0.0, 0.0, 0.125, 1.0][rng.gen_range(0..4)],
            min_child_weight: [0.0, 0.5, 1.0, 4.0][rng.gen_range(0..4)],
            ..HyperParams::default()
        };
        let idx: Vec<usize> = (0..n).collect();
        let got = find_best_split(&rows, &g, &h, &idx, &hp).map(|s| (s.feature, s.threshold, s.gain));
        let want = brute_force_split(&rows, &g, &h, hp.l2_lambda, hp.gamma_min_gain, hp.min_child_weight);
        match (got, want) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert_eq!(a.0, b.0);
                prop_assert_eq!(a.1, b.1);
                prop_assert!((a.2 - b.2).abs() <= 1e-12 * b.2.abs().max(1.0));
            }
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn training_loss_never_increases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, nf) = (rng.gen_range(4..80), rng.gen_range(1..6));
        let data = random_dataset(&mut rng, n, nf);
        let hp = HyperParams {
            n_estimators: rng.gen_range(1..12),
            max_depth: rng.gen_range(1..5),
            learning_rate: rng.gen_range(0.05..1.0),
            l2_lambda: rng.gen_range(0.0..2.0),
            min_child_weight: rng.gen_range(0.0..1.0),
            ..HyperParams::default()
        };
        let (_, history) = train_with_history(&data, &hp).unwrap();
        prop_assert_eq!(history.len(), hp.n_estimators + 1);
        for w in history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", history);
        }
    }

    #[test]
    fn monotone_transform_gives_same_predictions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 40, 3);
        let mut warped = data.clone();
        for r in warped.rows.iter_mut() {
            for v in r.iter_mut() {
                *v = v.exp() + 10.0;
            }
        }
        let hp = HyperParams { n_estimators: 4, max_depth: 3, ..HyperParams::default() };
        let a = train(&data, &hp).unwrap();
        let b = train(&warped, &hp).unwrap();
        for (x, y) in data.rows.iter().zip(&warped.rows) {
            prop_assert_eq!(a.predict_row(x).unwrap(), b.predict_row(y).unwrap());
        }
    }
}

#[test]
fn model_bytes_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = random_dataset(&mut rng, 60, 5);
    let hp = HyperParams { n_estimators: 6, max_depth: 3, ..HyperParams::default() };
    let a = train(&data, &hp).unwrap().to_json();
    let b = train(&data, &hp).unwrap().to_json();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let c = pool.install(|| train(&data, &hp).unwrap().to_json());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn separable_points_are_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] > 0.1)).collect();
    let data = Dataset::new(vec!["a".into(), "b".into()], rows, labels).unwrap();
    let hp = HyperParams { n_estimators: 20, max_depth: 3, ..HyperParams::default() };
    let model = train(&data, &hp).unwrap();
    let correct = data
        .rows
        .iter()
        .zip(&data.labels)
        .filter(|(r, &y)| model.predict_class(r).unwrap() == y)
        .count();
    assert!(correct as f64 / 200.0 >= 0.95, "{correct}/200");
}

fn separable(n: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    Dataset::new(vec!["x".into()], rows, labels).unwrap()
}

#[test]
fn grid_search_single_and_duplicate_configs() {
    let data = separable(30);
    let hp = HyperParams::default();
    let (best, table) = grid_search(&data, std::slice::from_ref(&hp), 5, 0).unwrap();
    assert_eq!(best, hp);
    assert_eq!(table.len(), 1);

    let twice = vec![hp.clone(), hp.clone()];
    let (best, table) = grid_search(&data, &twice, 5, 0).unwrap();
    assert_eq!(best, hp);
    assert_eq!(table[0].1, table[1].1);
}

#[test]
fn grid_search_rejects_null_model() {
    let data = separable(30);
    // Infinite gamma forbids every split, so this predicts the base score.
    let null = HyperParams { n_estimators: 1, max_depth: 1, gamma_min_gain: f64::INFINITY, ..HyperParams::default() };
    let useful = HyperParams { n_estimators: 5, max_depth: 2, ..HyperParams::default() };
    let (best, table) = grid_search(&data, &[null, useful.clone()], 5, 0).unwrap();
    assert_eq!(best, useful);
    assert!(table[0].1 < table[1].1);
    assert!(grid_search(&data, &[], 5, 0).is_err());
}
