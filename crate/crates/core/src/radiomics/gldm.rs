//! Gray level dependence features.

use crate::error::{Error, Result};

use super::sizes::SizeMatrix;
use super::{neighbourhood, DiscretizedRoi, TextureConfig};

/// Number of in-mask 26-neighbours of each in-mask voxel whose level differs
/// by at most `alpha`; `None` outside the mask.
pub fn dependences(roi: &DiscretizedRoi, alpha: u32) -> Vec<Option<usize>> {
    let offsets = neighbourhood(1);
    roi.levels()
        .iter()
        .enumerate()
        .map(|(idx, &level)| {
            if level == 0 {
                return None;
            }
            let c = roi.coords(idx).map(|v| v as isize);
            Some(
                offsets
                    .iter()
                    .filter(|d| {
                        let l = roi.level_at([c[0] + d[0], c[1] + d[1], c[2] + d[2]]);
                        l > 0 && l.abs_diff(level) <= alpha
                    })
                    .count(),
            )
        })
        .collect()
}

/// Matrix over (level, dependence + 1).
pub fn dependence_matrix(roi: &DiscretizedRoi, alpha: u32) -> SizeMatrix {
    let mut m = SizeMatrix::new(roi.ng() as usize, 27);
    for (dep, &level) in dependences(roi, alpha).iter().zip(roi.levels()) {
        if let Some(dep) = dep {
            m.add(level, dep + 1);
        }
    }
    m
}

/// The 14 features in [`super::GLDM`] order.
pub fn gldm_features(roi: &DiscretizedRoi, config: &TextureConfig) -> Result<[f64; 14]> {
    if roi.voxel_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let m = dependence_matrix(roi, config.gldm_alpha);
    let n = m.total();
    let (glv, dv) = m.variances();
    Ok([
        m.weighted_mean(|_, j| 1.0 / (j * j)),
        m.weighted_mean(|_, j| j * j),
        m.level_nonuniformity() / n,
        m.size_nonuniformity() / n,
        m.size_nonuniformity() / (n * n),
        glv,
        dv,
        m.entropy(config.epsilon),
        m.weighted_mean(|i, _| 1.0 / (i * i)),
        m.weighted_mean(|i, _| i * i),
        m.weighted_mean(|i, j| 1.0 / (i * i * j * j)),
        m.weighted_mean(|i, j| i * i / (j * j)),
        m.weighted_mean(|i, j| j * j / (i * i)),
        m.weighted_mean(|i, j| i * i * j * j),
    ])
}
