//! Radiomics feature extraction over a masked region.
//!
//! Seven families are computed, in this canonical order:
//!
//! | family | count | source |
//! |---|---|---|
//! | `firstorder_` | 18 | raw in-mask intensities (entropy/uniformity on the discretized histogram) |
//! | `shape_` | 14 | marching-cubes mesh and voxel coordinates of the mask |
//! | `glcm_` | 24 | gray level co-occurrence, 13 directions averaged |
//! | `glrlm_` | 16 | gray level run lengths, 13 directions averaged |
//! | `glszm_` | 16 | 26-connected equal-level zones |
//! | `ngtdm_` | 5 | neighbourhood gray tone differences |
//! | `gldm_` | 14 | gray level dependence counts |
//!
//! The texture families share a [`DiscretizedRoi`] built with a fixed bin
//! width anchored at the in-mask minimum.

mod discretize;
pub mod firstorder;
pub mod glcm;
pub mod gldm;
pub mod glrlm;
pub mod glszm;
pub mod marching_cubes;
mod names;
pub mod ngtdm;
pub mod shape;
mod sizes;

use serde::{Deserialize, Serialize};

pub use discretize::{discretize, DiscretizedRoi};
pub use names::{FEATURE_NAMES, FIRSTORDER, GLCM, GLDM, GLRLM, GLSZM, NGTDM, SHAPE};

use crate::error::{Error, Result};
use crate::grid::{Mask, Volume};

/// Parameters of the texture families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureConfig {
    /// Width of one gray level bin in intensity units.
    pub bin_width: f64,
    /// Offset length of the co-occurrence directions.
    pub glcm_distance: usize,
    /// Maximum level difference for two neighbours to count as dependent.
    pub gldm_alpha: u32,
    /// Chebyshev radius of the NGTDM neighbourhood.
    pub ngtdm_distance: usize,
    /// Guard added inside logarithms and compared against vanishing
    /// denominators.
    pub epsilon: f64,
}

impl Default for TextureConfig {
    fn default() -> Self {
        TextureConfig {
            bin_width: 25.0,
            glcm_distance: 1,
            gldm_alpha: 0,
            ngtdm_distance: 1,
            epsilon: 2.2e-16,
        }
    }
}

impl TextureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::InvalidParam(format!("bin_width must be positive, got {}", self.bin_width)));
        }
        if self.glcm_distance < 1 {
            return Err(Error::InvalidParam("glcm_distance must be at least 1".into()));
        }
        if self.ngtdm_distance < 1 {
            return Err(Error::InvalidParam("ngtdm_distance must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParam("epsilon must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Named features in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    entries: Vec<(String, f64)>,
}

impl FeatureVector {
    pub fn new(entries: Vec<(String, f64)>) -> Self {
        FeatureVector { entries }
    }

    /// Pairs 107 values with the canonical names.
    pub fn from_canonical(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_NAMES.len() {
            return Err(Error::Schema(format!(
                "expected {} values, got {}",
                FEATURE_NAMES.len(),
                values.len()
            )));
        }
        Ok(FeatureVector {
            entries: FEATURE_NAMES.iter().map(|n| n.to_string()).zip(values).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values().collect()
    }

    /// Whether names match the canonical 107-name list in order.
    pub fn is_canonical(&self) -> bool {
        self.len() == FEATURE_NAMES.len() && self.names().zip(FEATURE_NAMES.iter()).all(|(a, b)| a == *b)
    }
}

/// The 13 unique directions of the 26-neighbourhood: offsets in
/// `{-1, 0, 1}^3` whose first non-zero component (in z, y, x order) is
/// positive.
pub fn unique_directions() -> Vec<[isize; 3]> {
    let mut dirs = Vec::with_capacity(13);
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let first = if dz != 0 {
                    dz
                } else if dy != 0 {
                    dy
                } else {
                    dx
                };
                if first > 0 {
                    dirs.push([dx, dy, dz]);
                }
            }
        }
    }
    dirs
}

/// All offsets within Chebyshev distance `radius`, excluding the origin.
pub fn neighbourhood(radius: usize) -> Vec<[isize; 3]> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

pub(crate) fn log2_guarded(p: f64, eps: f64) -> f64 {
    (p + eps).log2()
}

/// Computes all seven families and concatenates them in canonical order.
pub fn extract_all(volume: &Volume, mask: &Mask, config: &TextureConfig) -> Result<FeatureVector> {
    extract_regions(volume, mask, mask, config)
}

/// As [`extract_all`], but intensity and texture families are computed over
/// `region` while shape features describe `shape_mask`.
pub fn extract_regions(volume: &Volume, region: &Mask, shape_mask: &Mask, config: &TextureConfig) -> Result<FeatureVector> {
    config.validate()?;
    region.check_aligned_with(volume)?;
    shape_mask.check_aligned_with(volume)?;
    let roi = discretize(volume, region, config)?;

    let mut values = Vec::with_capacity(FEATURE_NAMES.len());
    values.extend(firstorder::first_order_features(volume, region, config)?);
    values.extend(shape::shape_features(shape_mask)?);
    values.extend(glcm::glcm_features(&roi, config)?);
    values.extend(glrlm::glrlm_features(&roi, config)?);
    values.extend(glszm::glszm_features(&roi, config)?);
    values.extend(ngtdm::ngtdm_features(&roi, config)?);
    values.extend(gldm::gldm_features(&roi, config)?);

    debug_assert_eq!(values.len(), FEATURE_NAMES.len());
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(FEATURE_NAMES[i].to_string()));
    }
    FeatureVector::from_canonical(values)
}
