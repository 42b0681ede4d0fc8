//! Per-case processing: reorient, denoise, locate and expand the ROI, crop,
//! extract features or export slices.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{PipelineConfig, Region};
use crate::error::{Error, Result};
use crate::grid::{Mask, Volume};
use crate::io::{load_mask, load_volume, CaseRecord};
use crate::phantom::{image_path, mask_path};
use crate::preprocess::{gaussian_denoise, reorient_to_canonical};
use crate::radiomics::{extract_regions, FeatureVector};
use crate::roi::{crop, expand_box, export_slices_along, mask_bounding_box, BoundingBox, Image2d, SlicePlane};

/// One case to process.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInput {
    pub case_id: String,
    pub label: u8,
    pub image: PathBuf,
    pub mask: PathBuf,
}

#[derive(Deserialize)]
struct ManifestRow {
    case_id: String,
    label: u8,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    mask: Option<String>,
}

/// Reads a manifest CSV with columns `case_id,label` and optionally `image`,
/// `mask` (paths relative to the manifest's directory). Other columns, such
/// as `seed`, are ignored. Without explicit paths the files are
/// `<case_id>_img.nii` and `<case_id>_msk.nii` beside the manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<CaseInput>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{other:?}")),
    })?;
    let mut out = Vec::new();
    for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("{} row {}", path.display(), line + 2),
            detail: e.to_string(),
        })?;
        if row.label > 1 {
            return Err(Error::Parse {
                location: format!("{} row {}", path.display(), line + 2),
                detail: format!("label must be 0 or 1, got {}", row.label),
            });
        }
        out.push(CaseInput {
            image: row.image.map_or_else(|| image_path(dir, &row.case_id), |p| dir.join(p)),
            mask: row.mask.map_or_else(|| mask_path(dir, &row.case_id), |p| dir.join(p)),
            case_id: row.case_id,
            label: row.label,
        })
    }
    Ok(out)
}

/// A cropped, preprocessed region of interest.
#[derive(Debug, Clone)]
pub struct PreparedRoi {
    pub volume: Volume,
    pub mask: Mask,
    /// Expanded box in the reoriented full-volume index space.
    pub bbox: BoundingBox,
}

pub fn prepare_roi(volume: &Volume, mask: &Mask, config: &PipelineConfig) -> Result<PreparedRoi> {
    mask.check_aligned_with(volume)?;
    let (volume, mask) = if config.preprocess.reorient {
        (reorient_to_canonical(volume)?, reorient_to_canonical(mask)?)
    } else {
        (volume.clone(), mask.clone())
    };
    let denoised = gaussian_denoise(&volume, &config.preprocess.gaussian())?;
    let tight = mask_bounding_box(&mask)?;
    let bbox = expand_box(&tight, config.roi.expand_fraction, volume.dims())?;
    Ok(PreparedRoi {
        volume: crop(&denoised, &bbox)?,
        mask: crop(&mask, &bbox)?,
        bbox,
    })
}

pub fn case_features(volume: &Volume, mask: &Mask, config: &PipelineConfig) -> Result<FeatureVector> {
    let roi = prepare_roi(volume, mask, config)?;
    let texture = config.radiomics.texture();
    match config.radiomics.region {
        Region::Mask => extract_regions(&roi.volume, &roi.mask, &roi.mask, &texture),
        Region::Roi => {
            let whole = roi.mask.map(|_| true);
            extract_regions(&roi.volume, &whole, &roi.mask, &texture)
        }
    }
}

fn load_pair(case: &CaseInput) -> Result<(Volume, Mask)> {
    let v = load_volume(&case.image)?;
    let m = load_mask(&case.mask)?;
    m.check_aligned_with(&v)?;
    Ok((v, m))
}

/// Feature records for every case, in input order. Cases run in parallel on
/// the current rayon pool.
pub fn extract_cases(cases: &[CaseInput], config: &PipelineConfig) -> Vec<Result<CaseRecord>> {
    cases
        .par_iter()
        .map(|case| {
            let (v, m) = load_pair(case)?;
            let fv = case_features(&v, &m, config)?;
            Ok(CaseRecord::new(&case.case_id, case.label).with_features(fv))
        })
        .collect()
}

/// Slice images of the expanded ROI, in slice order.
pub fn case_slices(volume: &Volume, mask: &Mask, config: &PipelineConfig) -> Result<Vec<Image2d>> {
    let roi = prepare_roi(volume, mask, config)?;
    let s = config.roi.export_size;
    export_slices_along(&roi.volume, config.roi.export_plane, (s, s))
}

fn plane_letter(plane: SlicePlane) -> char {
    match plane {
        SlicePlane::Axial => 'z',
        SlicePlane::Coronal => 'y',
        SlicePlane::Sagittal => 'x',
    }
}

/// Writes `<case_id>_<axis><index>.pgm` per slice and returns the number of
/// files per case, in input order.
pub fn export_cases(cases: &[CaseInput], config: &PipelineConfig, out_dir: &Path) -> Vec<Result<usize>> {
    let letter = plane_letter(config.roi.export_plane);
    cases
        .par_iter()
        .map(|case| {
            let (v, m) = load_pair(case)?;
            let slices = case_slices(&v, &m, config)?;
            for (i, img) in slices.iter().enumerate() {
                img.write_pgm16(out_dir.join(format!("{}_{letter}{i:03}.pgm", case.case_id)))?;
            }
            Ok(slices.len())
        })
        .collect()
}
