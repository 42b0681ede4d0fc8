//! Region of interest: mask bounding box, proportional expansion, cropping
//! and 2D slice export.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, Mask, Volume};

/// Inclusive voxel index ranges on the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoundingBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| lo[a] > hi[a]) {
            return Err(Error::Range(format!("box lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(BoundingBox { lo, hi })
    }

    /// The whole grid.
    pub fn full(dims: [usize; 3]) -> Self {
        BoundingBox {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    pub fn extent(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a] + 1)
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        (0..3).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn contains_point(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }

    pub fn check_within(&self, dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if self.lo[a] > self.hi[a] || self.hi[a] >= dims[a] {
                return Err(Error::Range(format!(
                    "box {:?}..={:?} does not fit dims {dims:?}",
                    self.lo, self.hi
                )));
            }
        }
        Ok(())
    }
}

/// Tightest box around the foreground voxels.
pub fn mask_bounding_box(mask: &Mask) -> Result<BoundingBox> {
    let g = mask.geometry();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &on) in mask.data().iter().enumerate() {
        if on {
            any = true;
            let p = g.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(BoundingBox { lo, hi })
}

// Guards floor/ceil against representation error in `fraction * extent / 2`
// (0.1 * 20 / 2 must give exactly one voxel, not 1.0000000000000002).
const ROUNDING_SLACK: f64 = 1e-9;

/// Grows each axis by `fraction` of its extent, half on each side, rounding
/// outward and clamping to the grid.
pub fn expand_box(b: &BoundingBox, fraction: f64, dims: [usize; 3]) -> Result<BoundingBox> {
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(Error::InvalidParam(format!("expansion fraction must be >= 0, got {fraction}")));
    }
    b.check_within(dims)?;
    let mut out = *b;
    for a in 0..3 {
        let extent = (b.hi[a] - b.lo[a] + 1) as f64;
        let half = fraction / 2.0 * extent;
        let lo = (b.lo[a] as f64 - half + ROUNDING_SLACK).floor();
        let hi = (b.hi[a] as f64 + half - ROUNDING_SLACK).ceil();
        out.lo[a] = lo.max(0.0) as usize;
        out.hi[a] = (hi.min((dims[a] - 1) as f64)) as usize;
        out.lo[a] = out.lo[a].min(b.lo[a]);
        out.hi[a] = out.hi[a].max(b.hi[a]);
    }
    Ok(out)
}

/// Extracts the sub-grid covered by `b`, moving the origin to the box corner.
pub fn crop<T: Clone>(grid: &Grid<T>, b: &BoundingBox) -> Result<Grid<T>> {
    let g = grid.geometry();
    b.check_within(g.dims)?;
    let dims = b.extent();
    let geometry = Geometry {
        dims,
        spacing: g.spacing,
        origin: g.index_to_world(b.lo.map(|v| v as f64)),
        direction: g.direction,
    };
    let src = grid.data();
    let mut data = Vec::with_capacity(dims.iter().product());
    for z in b.lo[2]..=b.hi[2] {
        for y in b.lo[1]..=b.hi[1] {
            let start = g.index(b.lo[0], y, z);
            data.extend_from_slice(&src[start..start + dims[0]]);
        }
    }
    Ok(Grid::from_parts(geometry, data))
}

/// Plane used for 2D slice export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlicePlane {
    /// Constant z; image columns run along x, rows along y.
    #[default]
    Axial,
    /// Constant y; columns along x, rows along z.
    Coronal,
    /// Constant x; columns along y, rows along z.
    Sagittal,
}

/// A single-channel 2D image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2d {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image2d {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Binary PGM (P5) with 16-bit big-endian samples.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &v in &self.data {
            let s = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&s.to_be_bytes());
        }
        out
    }

    pub fn write_pgm16(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm16()).map_err(|e| Error::io(path, e))
    }
}

/// Min-max normalizes to `[0, 1]`; a constant image becomes all zeros.
pub fn normalize_min_max(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
    }
}

/// Bilinear resampling with edge-aligned sample positions: output pixel `i`
/// samples source coordinate `i * (n_in - 1) / (n_out - 1)`.
pub fn resize_bilinear(src: &Image2d, width: usize, height: usize) -> Image2d {
    fn positions(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = if n_out > 1 && n_in > 1 {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                } else {
                    0.0
                };
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    }
    let cols = positions(src.width, width);
    let rows = positions(src.height, height);
    let mut data = Vec::with_capacity(width * height);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src.get(c0, r0) * (1.0 - fc) + src.get(c1, r0) * fc;
            let bottom = src.get(c0, r1) * (1.0 - fc) + src.get(c1, r1) * fc;
            data.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    Image2d { width, height, data }
}

/// Extracts one slice of `volume` perpendicular to `plane`.
pub fn extract_slice(volume: &Volume, plane: SlicePlane, index: usize) -> Image2d {
    let [nx, ny, nz] = volume.dims();
    let (width, height) = match plane {
        SlicePlane::Axial => (nx, ny),
        SlicePlane::Coronal => (nx, nz),
        SlicePlane::Sagittal => (ny, nz),
    };
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let v = match plane {
                SlicePlane::Axial => volume.get(col, row, index),
                SlicePlane::Coronal => volume.get(col, index, row),
                SlicePlane::Sagittal => volume.get(index, col, row),
            };
            data.push(*v);
        }
    }
    Image2d { width, height, data }
}

pub fn slice_count(volume: &Volume, plane: SlicePlane) -> usize {
    let [nx, ny, nz] = volume.dims();
    match plane {
        SlicePlane::Axial => nz,
        SlicePlane::Coronal => ny,
        SlicePlane::Sagittal => nx,
    }
}

/// One normalized, resized image per slice along the chosen plane.
pub fn export_slices_along(volume: &Volume, plane: SlicePlane, size: (usize, usize)) -> Result<Vec<Image2d>> {
    if volume.is_empty() || size.0 == 0 || size.1 == 0 {
        return Err(Error::InvalidParam("slice export needs a non-empty volume and target size".into()));
    }
    Ok((0..slice_count(volume, plane))
        .map(|i| {
            let mut s = extract_slice(volume, plane, i);
            normalize_min_max(&mut s.data);
            resize_bilinear(&s, size.0, size.1)
        })
        .collect())
}

/// Axial slices resized to `size` (width, height).
pub fn export_slices(volume: &Volume, size: (usize, usize)) -> Result<Vec<Image2d>> {
    export_slices_along(volume, SlicePlane::Axial, size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with(dims: [usize; 3], points: &[[usize; 3]]) -> Mask {
        let g = Geometry::new(dims, [1.0; 3]).unwrap();
        Mask::from_fn(g, |x, y, z| points.contains(&[x, y, z])).unwrap()
    }

    #[test]
    fn bbox_single_voxel() {
        let m = mask_with([8, 8, 8], &[[3, 4, 5]]);
        assert_eq!(
            mask_bounding_box(&m).unwrap(),
            BoundingBox { lo: [3, 4, 5], hi: [3, 4, 5] }
        );
    }

    #[test]
    fn bbox_extremes() {
        let m = mask_with([8, 8, 10], &[[1, 1, 1], [6, 2, 9]]);
        assert_eq!(
            mask_bounding_box(&m).unwrap(),
            BoundingBox { lo: [1, 1, 1], hi: [6, 2, 9] }
        );
    }

    #[test]
    fn bbox_empty_mask() {
        let m = mask_with([4, 4, 4], &[]);
        assert!(matches!(mask_bounding_box(&m), Err(Error::EmptyMask)));
    }

    #[test]
    fn expand_formula() {
        let b = BoundingBox { lo: [10, 10, 10], hi: [20, 20, 20] };
        let e = expand_box(&b, 0.10, [64; 3]).unwrap();
        assert_eq!(e.lo, [9; 3]);
        assert_eq!(e.hi, [21; 3]);
    }

    #[test]
    fn expand_zero_fraction_is_identity() {
        let b = BoundingBox { lo: [3, 0, 7], hi: [9, 4, 7] };
        assert_eq!(expand_box(&b, 0.0, [16; 3]).unwrap(), b);
    }

    #[test]
    fn expand_clamps() {
        let b = BoundingBox { lo: [0; 3], hi: [63; 3] };
        assert_eq!(expand_box(&b, 0.10, [64; 3]).unwrap(), b);
    }

    #[test]
    fn expand_exact_margin_does_not_overshoot() {
        // extent 20, 5% per side = exactly one voxel.
        let b = BoundingBox { lo: [10, 10, 10], hi: [29, 29, 29] };
        let e = expand_box(&b, 0.10, [64; 3]).unwrap();
        assert_eq!(e.lo, [9; 3]);
        assert_eq!(e.hi, [30; 3]);
    }

    #[test]
    fn crop_full_extent_is_identity() {
        let g = Geometry::new([4, 5, 6], [1.0, 2.0, 3.0]).unwrap().with_origin([1.0, 2.0, 3.0]);
        let v = Volume::from_fn(g, |x, y, z| (x * y + z) as f64).unwrap();
        assert_eq!(crop(&v, &BoundingBox::full(v.dims())).unwrap(), v);
    }

    #[test]
    fn crop_corner_value_and_origin() {
        let g = Geometry::new([5, 5, 5], [1.0, 2.0, 3.0]).unwrap();
        let v = Volume::from_fn(g.clone(), |x, y, z| g.index(x, y, z) as f64).unwrap();
        let b = BoundingBox { lo: [1, 1, 1], hi: [3, 3, 3] };
        let c = crop(&v, &b).unwrap();
        assert_eq!(c.dims(), [3, 3, 3]);
        assert_eq!(*c.get(0, 0, 0), *v.get(1, 1, 1));
        assert_eq!(*c.get(2, 1, 0), *v.get(3, 2, 1));
        assert_eq!(c.geometry().origin, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn crop_out_of_range() {
        let g = Geometry::new([5, 5, 5], [1.0; 3]).unwrap();
        let v = Volume::new(g, vec![0.0; 125]).unwrap();
        let b = BoundingBox { lo: [0, 0, 0], hi: [5, 2, 2] };
        assert!(matches!(crop(&v, &b), Err(Error::Range(_))));
    }

    #[test]
    fn export_same_size_is_normalized_input() {
        let g = Geometry::new([224, 224, 3], [1.0; 3]).unwrap();
        let v = Volume::from_fn(g, |x, y, z| ((x * 7 + y * 13 + z) % 101) as f64 - 20.0).unwrap();
        let slices = export_slices(&v, (224, 224)).unwrap();
        assert_eq!(slices.len(), 3);
        for (z, s) in slices.iter().enumerate() {
            let mut expect = extract_slice(&v, SlicePlane::Axial, z).data;
            normalize_min_max(&mut expect);
            assert_eq!(s.data, expect);
        }
    }

    #[test]
    fn constant_slice_exports_zeros() {
        let g = Geometry::new([3, 4, 2], [1.0; 3]).unwrap();
        let v = Volume::new(g, vec![42.0; 24]).unwrap();
        let slices = export_slices(&v, (5, 5)).unwrap();
        assert!(slices.iter().all(|s| s.data.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn pgm_header_and_size() {
        let img = Image2d { width: 3, height: 2, data: vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0] };
        let bytes = img.to_pgm16();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 12);
        assert_eq!(&bytes[header.len()..header.len() + 2], &[0, 0]);
        assert_eq!(&bytes[header.len() + 4..header.len() + 6], &[0xff, 0xff]);
    }
}
