//! File formats: NIfTI-1 volumes and masks, and the feature table CSV.

pub mod features;
pub mod nifti;

pub use features::{format_real, load_features, save_features, CaseRecord};
pub use nifti::{load_mask, load_volume, save_mask, save_volume, Datatype};
