//! Deterministic synthetic cases: a noisy ellipsoidal organ in a cube, with
//! a darker, noisier shell just outside the organ for edema-positive cases.
//!
//! Per-case seeds come from the master seed by
//! `seed_i = splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15)`, where
//! `splitmix64` is the standard finalizer
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! with wrapping arithmetic. Voxel noise is drawn from a ChaCha8 generator
//! seeded with the case seed.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Mask, Volume};
use crate::io::{save_mask, save_volume, CaseRecord, Datatype};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of case `i` under `master`.
pub fn case_seed(master: u64, i: u64) -> u64 {
    splitmix64(master.wrapping_add((i + 1).wrapping_mul(GOLDEN)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    /// Cube edge length in voxels.
    pub grid: usize,
    pub spacing_mm: f64,
    /// Range of the organ's semi-axes in voxels.
    pub semi_axis_min: f64,
    pub semi_axis_max: f64,
    pub base_intensity: f64,
    pub noise_std: f64,
    /// Intensity of the halo relative to the organ.
    pub halo_offset: f64,
    pub halo_thickness_min: usize,
    pub halo_thickness_max: usize,
    pub seed: u64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            grid: 48,
            spacing_mm: 1.0,
            semi_axis_min: 8.0,
            semi_axis_max: 14.0,
            base_intensity: 60.0,
            noise_std: 5.0,
            halo_offset: -25.0,
            halo_thickness_min: 2,
            halo_thickness_max: 4,
            seed: 0,
        }
    }
}

/// Minimum free voxels between the halo's outer extent and the grid faces.
pub const MARGIN: f64 = 2.0;

impl PhantomParams {
    pub fn with_seed(seed: u64) -> Self {
        PhantomParams {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_mm > 0.0 && self.spacing_mm.is_finite()) {
            return Err(Error::InvalidParam("spacing_mm must be positive".into()));
        }
        if !(self.semi_axis_min > 0.0 && self.semi_axis_min <= self.semi_axis_max) {
            return Err(Error::InvalidParam("semi-axis range must be positive and ordered".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParam("noise_std must be non-negative".into()));
        }
        if self.halo_thickness_min < 1 || self.halo_thickness_min > self.halo_thickness_max {
            return Err(Error::InvalidParam("halo thickness range must be positive and ordered".into()));
        }
        let needed = 2.0 * (self.semi_axis_max + self.halo_thickness_max as f64 + MARGIN) + 1.0;
        if (self.grid as f64) < needed {
            return Err(Error::InvalidParam(format!(
                "grid of {} voxels cannot hold the organ and halo (needs {needed})",
                self.grid
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PhantomCase {
    pub volume: Volume,
    pub mask: Mask,
    /// Voxels of the halo shell (present for both labels; filled only for
    /// label 1).
    pub shell: Mask,
    pub record: CaseRecord,
}

/// Builds one case. The same parameters and label always give identical
/// data.
pub fn generate_case(params: &PhantomParams, label: u8, case_id: &str) -> Result<PhantomCase> {
    params.validate()?;
    if label > 1 {
        return Err(Error::InvalidParam(format!("label must be 0 or 1, got {label}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.grid;
    let semi: [f64; 3] = [0; 3].map(|_| rng.gen_range(params.semi_axis_min..=params.semi_axis_max));
    let thickness = rng.gen_range(params.halo_thickness_min..=params.halo_thickness_max) as f64;
    let mid = (n as f64 - 1.0) / 2.0;
    let center: [f64; 3] = [0, 1, 2].map(|a| {
        let room = mid - semi[a] - params.halo_thickness_max as f64 - MARGIN;
        let shift = room.clamp(0.0, 3.0);
        mid + if shift > 0.0 { rng.gen_range(-shift..=shift) } else { 0.0 }
    });

    let r2 = |p: [usize; 3], extra: f64| -> f64 {
        (0..3).map(|a| ((p[a] as f64 - center[a]) / (semi[a] + extra)).powi(2)).sum()
    };
    let geometry = Geometry::new([n; 3], [params.spacing_mm; 3])?;
    let mask = Mask::from_fn(geometry.clone(), |x, y, z| r2([x, y, z], 0.0) <= 1.0)?;
    let shell = Mask::from_fn(geometry.clone(), |x, y, z| {
        r2([x, y, z], 0.0) > 1.0 && r2([x, y, z], thickness) <= 1.0
    })?;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let halo_level = params.base_intensity + params.halo_offset;
    let data: Vec<f64> = mask
        .data()
        .iter()
        .zip(shell.data())
        .map(|(&organ, &halo)| {
            let e: f64 = unit.sample(&mut rng);
            if organ {
                params.base_intensity + params.noise_std * e
            } else if halo && label == 1 {
                halo_level + 2.0 * params.noise_std * e
            } else {
                params.noise_std * e
            }
        })
        .collect();
    Ok(PhantomCase {
        volume: Volume::new(geometry, data)?,
        mask,
        shell,
        record: CaseRecord::new(case_id, label),
    })
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub case_id: String,
    pub label: u8,
    pub seed: u64,
}

pub fn image_path(dir: &Path, case_id: &str) -> PathBuf {
    dir.join(format!("{case_id}_img.nii"))
}

pub fn mask_path(dir: &Path, case_id: &str) -> PathBuf {
    dir.join(format!("{case_id}_msk.nii"))
}

/// Manifest rows for `n_pos` positive cases followed by `n_neg` negatives,
/// named `case_0000`, `case_0001`, ...
pub fn plan_dataset(n_pos: usize, n_neg: usize, master_seed: u64) -> Vec<ManifestEntry> {
    (0..n_pos + n_neg)
        .map(|i| ManifestEntry {
            case_id: format!("case_{i:04}"),
            label: u8::from(i < n_pos),
            seed: case_seed(master_seed, i as u64),
        })
        .collect()
}

/// Writes `<case_id>_img.nii` (float32), `<case_id>_msk.nii` (uint8) and
/// `manifest.csv` into `out_dir`, returning the manifest rows.
pub fn generate_dataset(n_pos: usize, n_neg: usize, master_seed: u64, out_dir: &Path, template: &PhantomParams) -> Result<Vec<ManifestEntry>> {
    if n_pos < 1 || n_neg < 1 {
        return Err(Error::InvalidParam("need at least one case per class".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let plan = plan_dataset(n_pos, n_neg, master_seed);
    plan.par_iter().try_for_each(|entry| -> Result<()> {
        let params = PhantomParams {
            seed: entry.seed,
            ..template.clone()
        };
        let case = generate_case(&params, entry.label, &entry.case_id)?;
        save_volume(&case.volume, image_path(out_dir, &entry.case_id), Datatype::Float32)?;
        save_mask(&case.mask, mask_path(out_dir, &entry.case_id))
    })?;
    let manifest = out_dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| csv_error(&manifest, e))?;
    for entry in &plan {
        w.serialize(entry).map_err(|e| csv_error(&manifest, e))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(plan)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}
