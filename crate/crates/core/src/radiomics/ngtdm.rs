//! Neighbouring gray tone difference features.

use crate::error::{Error, Result};

use super::{neighbourhood, DiscretizedRoi, TextureConfig};

/// Coarseness reported when the summed differences vanish.
pub const COARSENESS_CAP: f64 = 1e6;

/// Per-level tallies: `n[i]` voxels with a valid neighbourhood and `s[i]`
/// summed `|i - mean neighbour level|`, zero-based by level.
#[derive(Debug, Clone, PartialEq)]
pub struct NgtdmTable {
    pub n: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn ngtdm_table(roi: &DiscretizedRoi, distance: usize) -> NgtdmTable {
    let ng = roi.ng() as usize;
    let offsets = neighbourhood(distance);
    let mut n = vec![0.0; ng];
    let mut s = vec![0.0; ng];
    for (idx, &level) in roi.levels().iter().enumerate() {
        if level == 0 {
            continue;
        }
        let c = roi.coords(idx).map(|v| v as isize);
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in &offsets {
            let l = roi.level_at([c[0] + d[0], c[1] + d[1], c[2] + d[2]]);
            if l > 0 {
                sum += l as f64;
                count += 1;
            }
        }
        if count > 0 {
            let i = level as usize - 1;
            n[i] += 1.0;
            s[i] += (level as f64 - sum / count as f64).abs();
        }
    }
    NgtdmTable { n, s }
}

/// The 5 features in [`super::NGTDM`] order.
pub fn ngtdm_features(roi: &DiscretizedRoi, config: &TextureConfig) -> Result<[f64; 5]> {
    if roi.voxel_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let table = ngtdm_table(roi, config.ngtdm_distance);
    let nvp: f64 = table.n.iter().sum();
    if nvp == 0.0 {
        return Err(Error::DegenerateRoi("no in-mask voxel has an in-mask neighbour".into()));
    }
    let eps = config.epsilon;
    // Levels actually present among valid voxels: (level, p, s).
    let present: Vec<(f64, f64, f64)> = table
        .n
        .iter()
        .zip(&table.s)
        .enumerate()
        .filter(|(_, (&n, _))| n > 0.0)
        .map(|(i, (&n, &s))| ((i + 1) as f64, n / nvp, s))
        .collect();
    let ngp = present.len() as f64;
    let sum_ps: f64 = present.iter().map(|&(_, p, s)| p * s).sum();
    let sum_s: f64 = present.iter().map(|&(_, _, s)| s).sum();

    let coarseness = if sum_ps < eps { COARSENESS_CAP } else { 1.0 / sum_ps };

    let mut pair_contrast = 0.0;
    let mut abs_diff = 0.0;
    let mut complexity = 0.0;
    let mut strength_num = 0.0;
    for &(i, pi, si) in &present {
        for &(j, pj, sj) in &present {
            pair_contrast += pi * pj * (i - j).powi(2);
            abs_diff += (i * pi - j * pj).abs();
            complexity += (i - j).abs() * (pi * si + pj * sj) / (pi + pj);
            strength_num += (pi + pj) * (i - j).powi(2);
        }
    }
    let contrast = if ngp > 1.0 {
        pair_contrast / (ngp * (ngp - 1.0)) * sum_s / nvp
    } else {
        0.0
    };
    let busyness = if abs_diff < eps { 0.0 } else { sum_ps / abs_diff };
    let complexity = complexity / nvp;
    let strength = if sum_s < eps { 0.0 } else { strength_num / sum_s };

    Ok([coarseness, contrast, busyness, complexity, strength])
}
