mod common;

use common::{all_close, dense_gaussian, first_order_oracle};
use edemarad::preprocess::{gaussian_denoise, gaussian_kernel, reorient_to_canonical, GaussianParams};
use edemarad::radiomics::{firstorder::first_order_features, TextureConfig};
use edemarad::{Geometry, Mask, Volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(rng: &mut impl Rng, dims: [usize; 3], spacing: [f64; 3]) -> Volume {
    let g = Geometry::new(dims, spacing).unwrap();
    Volume::from_fn(g, |_, _, _| rng.gen_range(-200.0..300.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn denoise_matches_dense_convolution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spacing = [0; 3].map(|_| rng.gen_range(0.5..2.0));
        let sigma = [0; 3].map(|_| rng.gen_range(0.3..1.5));
        let trunc = rng.gen_range(1.0..3.5);
        let v = random_volume(&mut rng, [9, 9, 9], spacing);
        let params = GaussianParams { sigma_mm: sigma, truncation: trunc };
        let got = gaussian_denoise(&v, &params).unwrap();
        let want = dense_gaussian(v.data(), [9, 9, 9], spacing, sigma, trunc);
        for (a, b) in got.data().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn denoise_preserves_constants(c in -1000.0f64..1000.0, sigma in 0.2f64..3.0, n in 1usize..8) {
        let g = Geometry::new([n, 5, 3], [0.7, 1.0, 2.5]).unwrap();
        let v = Volume::from_fn(g, |_, _, _| c).unwrap();
        let out = gaussian_denoise(&v, &GaussianParams::isotropic(sigma, 3.0)).unwrap();
        for x in out.data() {
            prop_assert!((x - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn kernel_sums_to_one(sigma in 0.05f64..10.0, radius in 1usize..40) {
        let k = gaussian_kernel(sigma, radius);
        prop_assert_eq!(k.len(), 2 * radius + 1);
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..radius {
            prop_assert_eq!(k[i], k[2 * radius - i]);
        }
    }

    #[test]
    fn reorientation_preserves_world_positions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm = [0usize, 1, 2];
        for i in (1..3).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut dir = [[0.0; 3]; 3];
        for (c, &r) in perm.iter().enumerate() {
            dir[r][c] = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        }
        let dims = [0; 3].map(|_| rng.gen_range(1..6));
        let spacing = [0; 3].map(|_| rng.gen_range(0.5..3.0));
        let origin = [0; 3].map(|_| rng.gen_range(-50.0..50.0));
        let g = Geometry::new(dims, spacing).unwrap().with_origin(origin).with_direction(dir).unwrap();
        let v = Volume::from_fn(g.clone(), |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap();
        let out = reorient_to_canonical(&v).unwrap();
        let og = out.geometry();
        for r in 0..3 {
            for c in 0..3 {
                prop_assert_eq!(og.direction[r][c], if r == c { 1.0 } else { 0.0 });
            }
        }
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let i = [x, y, z].map(|k| k as f64);
                    let mut w = origin;
                    for r in 0..3 {
                        for c in 0..3 {
                            w[r] += dir[r][c] * spacing[c] * i[c];
                        }
                    }
                    let j: Vec<usize> = (0..3)
                        .map(|a| ((w[a] - og.origin[a]) / og.spacing[a]).round() as usize)
                        .collect();
                    let back: Vec<f64> = (0..3).map(|a| og.origin[a] + og.spacing[a] * j[a] as f64).collect();
                    for a in 0..3 {
                        prop_assert!((back[a] - w[a]).abs() < 1e-9);
                    }
                    prop_assert_eq!(*out.get(j[0], j[1], j[2]), *v.get(x, y, z));
                }
            }
        }
    }

    #[test]
    fn first_order_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [0; 3].map(|_| rng.gen_range(1..8));
        let spacing = [0; 3].map(|_| rng.gen_range(0.5..2.0));
        let g = Geometry::new(dims, spacing).unwrap();
        let v = Volume::from_fn(g.clone(), |_, _, _| rng.gen_range(-100.0..400.0)).unwrap();
        let rate = rng.gen_range(0.1..1.0);
        let mut m = Mask::from_fn(g, |_, _, _| rng.gen_bool(rate)).unwrap();
        if m.count() == 0 {
            m.data_mut()[0] = true;
        }
        let cfg = TextureConfig { bin_width: rng.gen_range(5.0..60.0), ..TextureConfig::default() };
        let got = first_order_features(&v, &m, &cfg).unwrap();
        let values: Vec<f64> = v.data().iter().zip(m.data()).filter(|(_, &b)| b).map(|(&x, _)| x).collect();
        let want = first_order_oracle(&values, spacing.iter().product(), cfg.bin_width);
        all_close(&got, &want, 1e-9).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn constant_region_first_order() {
    let g = Geometry::new([3, 3, 3], [1.0; 3]).unwrap();
    let v = Volume::from_fn(g.clone(), |_, _, _| 42.0).unwrap();
    let m = Mask::from_fn(g, |_, _, _| true).unwrap();
    let f = first_order_features(&v, &m, &TextureConfig::default()).unwrap();
    assert_eq!(f[3], 42.0);
    assert_eq!(f[7], 42.0);
    assert_eq!(f[16], 0.0);
    assert_eq!(f[14], 0.0);
    assert_eq!(f[15], 0.0);
    assert_eq!(f[17], 1.0);
}
