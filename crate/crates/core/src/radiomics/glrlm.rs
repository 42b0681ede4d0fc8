//! Gray level run length features.

use crate::error::{Error, Result};

use super::sizes::SizeMatrix;
use super::{unique_directions, DiscretizedRoi, TextureConfig};

/// Run-length matrix along one direction. A run is a maximal chain of
/// in-mask voxels with equal level, stepping by `dir`.
pub fn run_length_matrix(roi: &DiscretizedRoi, dir: [isize; 3]) -> SizeMatrix {
    let dims = roi.dims();
    let max_len = dims.iter().copied().max().unwrap_or(1);
    let mut m = SizeMatrix::new(roi.ng() as usize, max_len);
    for (idx, &level) in roi.levels().iter().enumerate() {
        if level == 0 {
            continue;
        }
        let c = roi.coords(idx).map(|v| v as isize);
        let prev = [c[0] - dir[0], c[1] - dir[1], c[2] - dir[2]];
        if roi.level_at(prev) == level {
            continue;
        }
        let mut len = 1;
        let mut p = [c[0] + dir[0], c[1] + dir[1], c[2] + dir[2]];
        while roi.level_at(p) == level {
            len += 1;
            p = [p[0] + dir[0], p[1] + dir[1], p[2] + dir[2]];
        }
        m.add(level, len);
    }
    m
}

/// Features averaged over the given directions.
pub fn glrlm_features_along(roi: &DiscretizedRoi, directions: &[[isize; 3]], config: &TextureConfig) -> Result<[f64; 16]> {
    let voxels = roi.voxel_count() as f64;
    if voxels == 0.0 {
        return Err(Error::EmptyMask);
    }
    let mut acc = [0.0; 16];
    for d in directions {
        let f = run_length_matrix(roi, *d).run_like_features(voxels, config.epsilon);
        acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
    }
    Ok(acc.map(|v| v / directions.len() as f64))
}

/// The 16 features in [`super::GLRLM`] order, averaged over the 13 directions.
pub fn glrlm_features(roi: &DiscretizedRoi, config: &TextureConfig) -> Result<[f64; 16]> {
    glrlm_features_along(roi, &unique_directions(), config)
}
