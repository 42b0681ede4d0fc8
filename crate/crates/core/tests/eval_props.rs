use edemarad::eval::{confusion_metrics, dice, foreground_iou, miou, stratified_kfold, voxel_precision_recall};
use edemarad::{Geometry, Mask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask_from(bits: &[bool]) -> Mask {
    Mask::new(Geometry::new([bits.len(), 1, 1], [1.0; 3]).unwrap(), bits.to_vec()).unwrap()
}

#[test]
fn overlap_identities() {
    let a = mask_from(&[true, true, false, false]);
    let b = mask_from(&[false, false, true, true]);
    let half = mask_from(&[true, false, false, false]);
    let shifted = mask_from(&[false, true, true, false]);
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(foreground_iou(&a, &a).unwrap(), 1.0);
    assert_eq!(miou(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&a, &b).unwrap(), 0.0);
    assert_eq!(foreground_iou(&a, &b).unwrap(), 0.0);
    assert_eq!(dice(&a, &shifted).unwrap(), 0.5);
    assert_eq!(foreground_iou(&a, &shifted).unwrap(), 1.0 / 3.0);
    assert_eq!(voxel_precision_recall(&half, &a).unwrap(), (1.0, 0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn iou_is_dice_over_two_minus_dice(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..300);
        let (pa, pb) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(pa)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.gen_bool(pb)).collect();
        let (a, b) = (mask_from(&a), mask_from(&b));
        let d = dice(&a, &b).unwrap();
        let iou = foreground_iou(&a, &b).unwrap();
        prop_assert!((iou - d / (2.0 - d)).abs() <= 1e-12);
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert_eq!(miou(&a, &b).unwrap(), miou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn folds_partition_and_balance(seed in any::<u64>(), k in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_pos = rng.gen_range(k..60);
        let n_neg = rng.gen_range(k..60);
        let mut ids: Vec<String> = (0..n_pos + n_neg).map(|i| format!("c{i:03}")).collect();
        let mut labels: Vec<u8> = (0..n_pos + n_neg).map(|i| u8::from(i < n_pos)).collect();
        // Interleave so input order carries no class structure.
        for i in (1..ids.len()).rev() {
            let j = rng.gen_range(0..=i);
            ids.swap(i, j);
            labels.swap(i, j);
        }
        let folds = stratified_kfold(&ids, &labels, k, seed).unwrap();
        let mut seen = vec![0usize; ids.len()];
        for f in 0..k {
            let (train, test) = folds.split(f);
            prop_assert_eq!(train.len() + test.len(), ids.len());
            prop_assert!(!test.is_empty());
            for &i in &test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for label in [0u8, 1] {
            let s = folds.fold_sizes(&labels, label);
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
        let totals: Vec<usize> = (0..k).map(|f| folds.fold.iter().filter(|&&x| x == f).count()).collect();
        prop_assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 1);
        prop_assert_eq!(folds.clone(), stratified_kfold(&ids, &labels, k, seed).unwrap());
    }

    #[test]
    fn confusion_counts_add_up(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..100);
        let pred: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let truth: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let m = confusion_metrics(&pred, &truth).unwrap();
        prop_assert_eq!(m.counts.total(), n);
        let agree = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
        prop_assert!((m.accuracy - agree as f64 / n as f64).abs() < 1e-15);
    }
}
