//! First-order intensity statistics over the in-mask voxels.

use crate::error::{Error, Result};
use crate::grid::{Mask, Volume};

use super::{discretize, log2_guarded, TextureConfig};

/// Percentile with linear interpolation between closest ranks:
/// position `q / 100 * (n - 1)` in the sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// The 18 first-order features in [`super::FIRSTORDER`] order.
///
/// Variance is the population variance and Kurtosis is non-excess. When the
/// region has zero variance (including a single voxel) Skewness and Kurtosis
/// are 0.
pub fn first_order_features(volume: &Volume, mask: &Mask, config: &TextureConfig) -> Result<[f64; 18]> {
    mask.check_aligned_with(volume)?;
    let mut x: Vec<f64> = volume
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &on)| on)
        .map(|(&v, _)| v)
        .collect();
    if x.is_empty() {
        return Err(Error::EmptyMask);
    }
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let eps = config.epsilon;

    let energy: f64 = x.iter().map(|v| v * v).sum();
    let total_energy = volume.geometry().voxel_volume() * energy;
    let minimum = x[0];
    let maximum = x[x.len() - 1];
    let mean = x.iter().sum::<f64>() / n;
    let p10 = percentile(&x, 10.0);
    let p25 = percentile(&x, 25.0);
    let p75 = percentile(&x, 75.0);
    let p90 = percentile(&x, 90.0);
    let median = percentile(&x, 50.0);

    let mad = x.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    let robust: Vec<f64> = x.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    // With two voxels no value lies inside [P10, P90].
    let rmad = if robust.is_empty() {
        0.0
    } else {
        let robust_mean = robust.iter().sum::<f64>() / robust.len() as f64;
        robust.iter().map(|v| (v - robust_mean).abs()).sum::<f64>() / robust.len() as f64
    };
    let rms = (energy / n).sqrt();

    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };

    let roi = discretize(volume, mask, config)?;
    let mut hist = vec![0usize; roi.ng() as usize + 1];
    for &l in roi.levels() {
        if l > 0 {
            hist[l as usize] += 1;
        }
    }
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in &hist[1..] {
        if c > 0 {
            let p = c as f64 / n;
            entropy -= p * log2_guarded(p, eps);
            uniformity += p * p;
        }
    }

    Ok([
        energy,
        total_energy,
        entropy,
        minimum,
        p10,
        p90,
        maximum,
        mean,
        median,
        p75 - p25,
        maximum - minimum,
        mad,
        rmad,
        rms,
        skewness,
        kurtosis,
        m2,
        uniformity,
    ])
}
