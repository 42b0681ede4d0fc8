//! Gray level size zone features.

use crate::error::{Error, Result};

use super::sizes::SizeMatrix;
use super::{neighbourhood, DiscretizedRoi, TextureConfig};

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Labels 26-connected zones of equal level. Returns `(level, size)` per
/// zone, ordered by the zone's first voxel index.
pub fn zones(roi: &DiscretizedRoi) -> Vec<(u32, usize)> {
    let levels = roi.levels();
    let mut parent: Vec<usize> = (0..levels.len()).collect();
    // Half of the neighbourhood suffices: each adjacency is seen once from
    // the later voxel looking back.
    let back: Vec<[isize; 3]> = neighbourhood(1)
        .into_iter()
        .filter(|d| (d[2], d[1], d[0]) < (0, 0, 0))
        .collect();
    for (idx, &level) in levels.iter().enumerate() {
        if level == 0 {
            continue;
        }
        let c = roi.coords(idx).map(|v| v as isize);
        for d in &back {
            let q = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
            if roi.level_at(q) == level {
                let other = roi.index(q[0] as usize, q[1] as usize, q[2] as usize);
                let (a, b) = (find(&mut parent, idx), find(&mut parent, other));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut size = vec![0usize; levels.len()];
    for idx in 0..levels.len() {
        if levels[idx] > 0 {
            let r = find(&mut parent, idx);
            size[r] += 1;
        }
    }
    (0..levels.len())
        .filter(|&i| size[i] > 0)
        .map(|i| (levels[i], size[i]))
        .collect()
}

pub fn size_zone_matrix(roi: &DiscretizedRoi) -> SizeMatrix {
    let zs = zones(roi);
    let max_size = zs.iter().map(|z| z.1).max().unwrap_or(1);
    let mut m = SizeMatrix::new(roi.ng() as usize, max_size);
    for (level, size) in zs {
        m.add(level, size);
    }
    m
}

/// The 16 features in [`super::GLSZM`] order.
pub fn glszm_features(roi: &DiscretizedRoi, config: &TextureConfig) -> Result<[f64; 16]> {
    let voxels = roi.voxel_count() as f64;
    if voxels == 0.0 {
        return Err(Error::EmptyMask);
    }
    Ok(size_zone_matrix(roi).run_like_features(voxels, config.epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiomics::GLSZM;

    fn get(f: &[f64; 16], name: &str) -> f64 {
        f[GLSZM.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn constant_cube_is_one_zone() {
        let roi = DiscretizedRoi::from_levels([2, 2, 2], vec![1; 8]).unwrap();
        assert_eq!(zones(&roi), vec![(1, 8)]);
        let f = glszm_features(&roi, &TextureConfig::default()).unwrap();
        assert_eq!(get(&f, "ZonePercentage"), 0.125);
    }

    #[test]
    fn opposite_corners_are_separate() {
        let mut levels = vec![0; 27];
        levels[0] = 1;
        levels[26] = 1;
        let roi = DiscretizedRoi::from_levels([3, 3, 3], levels).unwrap();
        assert_eq!(zones(&roi), vec![(1, 1), (1, 1)]);
    }

    #[test]
    fn diagonal_contact_connects() {
        let mut levels = vec![0; 8];
        levels[0] = 2;
        levels[7] = 2;
        let roi = DiscretizedRoi::from_levels([2, 2, 2], levels).unwrap();
        assert_eq!(zones(&roi), vec![(2, 2)]);
    }

    #[test]
    fn different_levels_do_not_merge() {
        let roi = DiscretizedRoi::from_levels([3, 1, 1], vec![1, 2, 1]).unwrap();
        assert_eq!(zones(&roi), vec![(1, 1), (2, 1), (1, 1)]);
    }
}
