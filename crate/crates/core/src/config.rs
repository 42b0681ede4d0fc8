//! Pipeline configuration file (JSON). Every section and key is optional;
//! unknown keys are rejected.
//!
//! ```json
//! {
//!   "preprocess": {"sigma_mm": 0.5, "truncation": 3.0, "reorient": true},
//!   "roi": {"expand_fraction": 0.1, "export_size": 224, "export_plane": "axial"},
//!   "radiomics": {"bin_width": 25.0, "glcm_distance": 1, "gldm_alpha": 0,
//!                 "ngtdm_distance": 1, "epsilon": 2.2e-16, "region": "roi"},
//!   "gbdt": {"n_estimators": 3, "max_depth": 2, "learning_rate": 0.3, "l2_lambda": 1.0,
//!            "gamma_min_gain": 0.0, "min_child_weight": 1.0, "base_score": 0.5},
//!   "eval": {"k": 5, "seed": 0}
//! }
//! ```
//!
//! `sigma_mm` is either one number or a three-element array (x, y, z).
//! `radiomics.region` selects the voxels for intensity and texture features:
//! `"roi"` uses every voxel of the expanded box, `"mask"` only the organ.
//! Shape features always describe the organ mask.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::HyperParams;
use crate::preprocess::GaussianParams;
use crate::radiomics::TextureConfig;
use crate::roi::SlicePlane;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Isotropic(f64),
    PerAxis([f64; 3]),
}

impl Sigma {
    pub fn per_axis(self) -> [f64; 3] {
        match self {
            Sigma::Isotropic(s) => [s; 3],
            Sigma::PerAxis(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub sigma_mm: Sigma,
    pub truncation: f64,
    pub reorient: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let g = GaussianParams::default();
        PreprocessConfig {
            sigma_mm: Sigma::Isotropic(g.sigma_mm[0]),
            truncation: g.truncation,
            reorient: true,
        }
    }
}

impl PreprocessConfig {
    pub fn gaussian(&self) -> GaussianParams {
        GaussianParams {
            sigma_mm: self.sigma_mm.per_axis(),
            truncation: self.truncation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiConfig {
    pub expand_fraction: f64,
    pub export_size: usize,
    pub export_plane: SlicePlane,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            expand_fraction: 0.10,
            export_size: 224,
            export_plane: SlicePlane::Axial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    #[default]
    Roi,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiomicsConfig {
    pub bin_width: f64,
    pub glcm_distance: usize,
    pub gldm_alpha: u32,
    pub ngtdm_distance: usize,
    pub epsilon: f64,
    pub region: Region,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        let t = TextureConfig::default();
        RadiomicsConfig {
            bin_width: t.bin_width,
            glcm_distance: t.glcm_distance,
            gldm_alpha: t.gldm_alpha,
            ngtdm_distance: t.ngtdm_distance,
            epsilon: t.epsilon,
            region: Region::Roi,
        }
    }
}

impl RadiomicsConfig {
    pub fn texture(&self) -> TextureConfig {
        TextureConfig {
            bin_width: self.bin_width,
            glcm_distance: self.glcm_distance,
            gldm_alpha: self.gldm_alpha,
            ngtdm_distance: self.ngtdm_distance,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub roi: RoiConfig,
    pub radiomics: RadiomicsConfig,
    pub gbdt: HyperParams,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("config line {} column {}", e.line(), e.column()),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.gaussian().validate()?;
        let f = self.roi.expand_fraction;
        if !(f >= 0.0 && f.is_finite()) {
            return Err(Error::InvalidParam(format!("roi.expand_fraction must be non-negative, got {f}")));
        }
        if self.roi.export_size == 0 {
            return Err(Error::InvalidParam("roi.export_size must be positive".into()));
        }
        self.radiomics.texture().validate()?;
        self.gbdt.validate()?;
        if self.eval.k < 2 {
            return Err(Error::InvalidParam(format!("eval.k must be at least 2, got {}", self.eval.k)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
