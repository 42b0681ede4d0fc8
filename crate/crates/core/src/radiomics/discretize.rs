use crate::error::{Error, Result};
use crate::grid::{Mask, Volume};
use crate::roi::{crop, mask_bounding_box};

use super::TextureConfig;

/// Gray levels over the mask's bounding box: 0 outside the mask, `1..=ng`
/// inside.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedRoi {
    dims: [usize; 3],
    levels: Vec<u32>,
    ng: u32,
    pub bin_width: f64,
    pub min_intensity: f64,
}

impl DiscretizedRoi {
    /// Wraps an already discretized grid. `ng` becomes the largest level.
    pub fn from_levels(dims: [usize; 3], levels: Vec<u32>) -> Result<Self> {
        if levels.len() != dims.iter().product::<usize>() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid(format!("{} levels for dims {dims:?}", levels.len())));
        }
        let ng = levels.iter().copied().max().unwrap_or(0);
        if ng == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(DiscretizedRoi {
            dims,
            levels,
            ng,
            bin_width: 1.0,
            min_intensity: 1.0,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn ng(&self) -> u32 {
        self.ng
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Number of in-mask voxels.
    pub fn voxel_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l > 0).count()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Level at a signed position; 0 outside the grid.
    #[inline]
    pub fn level_at(&self, p: [isize; 3]) -> u32 {
        if (0..3).any(|a| p[a] < 0 || p[a] >= self.dims[a] as isize) {
            0
        } else {
            self.levels[self.index(p[0] as usize, p[1] as usize, p[2] as usize)]
        }
    }
}

/// Bins in-mask intensities: `level = floor((x - min) / bin_width) + 1`.
pub fn discretize(volume: &Volume, mask: &Mask, config: &TextureConfig) -> Result<DiscretizedRoi> {
    config.validate()?;
    mask.check_aligned_with(volume)?;
    let bbox = mask_bounding_box(mask)?;
    let v = crop(volume, &bbox)?;
    let m = crop(mask, &bbox)?;

    let min = v
        .data()
        .iter()
        .zip(m.data())
        .filter(|(_, &on)| on)
        .map(|(&x, _)| x)
        .fold(f64::INFINITY, f64::min);
    let levels: Vec<u32> = v
        .data()
        .iter()
        .zip(m.data())
        .map(|(&x, &on)| {
            if on {
                ((x - min) / config.bin_width).floor() as u32 + 1
            } else {
                0
            }
        })
        .collect();
    let ng = levels.iter().copied().max().unwrap_or(0);
    Ok(DiscretizedRoi {
        dims: v.dims(),
        levels,
        ng,
        bin_width: config.bin_width,
        min_intensity: min,
    })
}
