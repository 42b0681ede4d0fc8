//! Canonical reorientation and Gaussian denoising.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, Volume, IDENTITY};

/// Maximum deviation of a direction cosine from 0 or ±1 for a scan to be
/// treated as axis aligned.
pub const AXIS_ALIGNED_TOLERANCE: f64 = 1e-3;

/// Index permutation and flips that bring a grid to canonical orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisMapping {
    /// `target[a]` is the world axis index axis `a` runs along.
    pub target: [usize; 3],
    /// Whether index axis `a` runs against its world axis.
    pub flip: [bool; 3],
}

impl AxisMapping {
    pub fn of(geometry: &Geometry) -> Result<Self> {
        let d = &geometry.direction;
        let mut target = [0usize; 3];
        let mut flip = [false; 3];
        let mut used = [false; 3];
        for a in 0..3 {
            let w = (0..3)
                .max_by(|&i, &j| d[i][a].abs().total_cmp(&d[j][a].abs()))
                .unwrap();
            for r in 0..3 {
                let expect = if r == w { 1.0 } else { 0.0 };
                if (d[r][a].abs() - expect).abs() > AXIS_ALIGNED_TOLERANCE {
                    return Err(Error::UnsupportedOrientation);
                }
            }
            if used[w] {
                return Err(Error::UnsupportedOrientation);
            }
            used[w] = true;
            target[a] = w;
            flip[a] = d[w][a] < 0.0;
        }
        Ok(AxisMapping { target, flip })
    }

    pub fn is_identity(&self) -> bool {
        self.target == [0, 1, 2] && self.flip == [false; 3]
    }
}

/// Permutes and flips voxel data so that the index axes run along +x, +y,
/// +z. No interpolation is performed, so masks stay binary and aligned.
pub fn reorient_to_canonical<T: Clone>(grid: &Grid<T>) -> Result<Grid<T>> {
    let g = grid.geometry();
    let map = AxisMapping::of(g)?;
    if map.is_identity() && g.direction == IDENTITY {
        return Ok(grid.clone());
    }

    let mut dims = [0usize; 3];
    let mut spacing = [0f64; 3];
    let mut corner = [0f64; 3];
    for a in 0..3 {
        dims[map.target[a]] = g.dims[a];
        spacing[map.target[a]] = g.spacing[a];
        if map.flip[a] {
            corner[a] = (g.dims[a] - 1) as f64;
        }
    }
    let geometry = Geometry {
        dims,
        spacing,
        origin: g.index_to_world(corner),
        direction: IDENTITY,
    };

    let src = grid.data();
    let mut data = Vec::with_capacity(src.len());
    let mut out = [0usize; 3];
    for z in 0..dims[2] {
        out[2] = z;
        for y in 0..dims[1] {
            out[1] = y;
            for x in 0..dims[0] {
                out[0] = x;
                let mut idx = [0usize; 3];
                for a in 0..3 {
                    let o = out[map.target[a]];
                    idx[a] = if map.flip[a] { g.dims[a] - 1 - o } else { o };
                }
                data.push(src[g.index(idx[0], idx[1], idx[2])].clone());
            }
        }
    }
    Ok(Grid::from_parts(geometry, data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    /// Standard deviation in millimeters along each axis.
    pub sigma_mm: [f64; 3],
    /// Kernel half-width in standard deviations.
    pub truncation: f64,
}

impl GaussianParams {
    pub fn isotropic(sigma_mm: f64, truncation: f64) -> Self {
        GaussianParams {
            sigma_mm: [sigma_mm; 3],
            truncation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_mm.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParam(format!("sigma_mm must be positive, got {:?}", self.sigma_mm)));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::InvalidParam(format!("truncation must be positive, got {}", self.truncation)));
        }
        Ok(())
    }

    /// Kernel radius in voxels along each axis, at least one.
    pub fn radius(&self, spacing: [f64; 3]) -> [usize; 3] {
        let mut r = [1usize; 3];
        for a in 0..3 {
            r[a] = ((self.truncation * self.sigma_mm[a] / spacing[a]).ceil() as usize).max(1);
        }
        r
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        GaussianParams::isotropic(0.5, 3.0)
    }
}

/// Sampled Gaussian of `2 * radius + 1` taps, renormalized to unit sum.
pub fn gaussian_kernel(sigma_voxels: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma_voxels * sigma_voxels)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for w in k.iter_mut() {
        *w /= sum;
    }
    k
}

/// Mirror reflection about the edge samples without repeating them:
/// `-1 -> 1`, `n -> n - 2`.
#[inline]
pub fn mirror_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn convolve_axis(data: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let n = dims[axis];
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; n];
    let [nx, ny, nz] = dims;
    let (outer_a, outer_b) = match axis {
        0 => ((ny, nx), (nz, nx * ny)),
        1 => ((nx, 1), (nz, nx * ny)),
        _ => ((nx, 1), (ny, nx)),
    };
    for b in 0..outer_b.0 {
        for a in 0..outer_a.0 {
            let start = a * outer_a.1 + b * outer_b.1;
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[start + i * stride];
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let j = mirror_index(i as isize + t as isize - r, n);
                    acc += w * line[j];
                }
                out[start + i * stride] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian smoothing, applied along x, then y, then z.
pub fn gaussian_denoise(volume: &Volume, params: &GaussianParams) -> Result<Volume> {
    params.validate()?;
    if volume.is_empty() {
        return Err(Error::InvalidGrid("cannot denoise an empty volume".into()));
    }
    let spacing = volume.spacing();
    let radius = params.radius(spacing);
    let dims = volume.dims();
    let mut data = volume.data().to_vec();
    for axis in 0..3 {
        let kernel = gaussian_kernel(params.sigma_mm[axis] / spacing[axis], radius[axis]);
        data = convolve_axis(&data, dims, axis, &kernel);
    }
    Ok(Grid::from_parts(volume.geometry().clone(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> Volume {
        let g = Geometry::new(dims, [1.0, 2.0, 3.0]).unwrap();
        Volume::from_fn(g, |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap()
    }

    #[test]
    fn canonical_input_is_returned_unchanged() {
        let v = ramp([3, 4, 5]);
        let r = reorient_to_canonical(&v).unwrap();
        assert_eq!(r, v);
    }

    #[test]
    fn x_flip_reverses_axis_and_moves_origin() {
        let v = ramp([4, 2, 2]);
        let g = v
            .geometry()
            .clone()
            .with_origin([10.0, 0.0, 0.0])
            .with_direction([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        let flipped = Volume::new(g, v.data().to_vec()).unwrap();
        let r = reorient_to_canonical(&flipped).unwrap();
        assert_eq!(r.geometry().direction, IDENTITY);
        // Former far corner: 10 - 3 * 1mm.
        assert_eq!(r.geometry().origin, [7.0, 0.0, 0.0]);
        for x in 0..4 {
            assert_eq!(*r.get(x, 1, 1), *v.get(3 - x, 1, 1));
        }
    }

    #[test]
    fn oblique_rejected() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let g = Geometry::new([2, 2, 2], [1.0; 3])
            .unwrap()
            .with_direction([[c, -c, 0.0], [c, c, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        let v = Volume::new(g, vec![0.0; 8]).unwrap();
        assert!(matches!(reorient_to_canonical(&v), Err(Error::UnsupportedOrientation)));
    }

    #[test]
    fn near_aligned_is_accepted() {
        let e = 5e-4;
        let g = Geometry::new([2, 3, 4], [1.0; 3])
            .unwrap()
            .with_direction([[0.0, e, 1.0], [e, 1.0, 0.0], [1.0, 0.0, e]])
            .unwrap();
        let v = Volume::new(g, (0..24).map(|i| i as f64).collect()).unwrap();
        let r = reorient_to_canonical(&v).unwrap();
        assert_eq!(r.dims(), [4, 3, 2]);
    }

    #[test]
    fn mirror_indices() {
        let n = 5;
        let got: Vec<usize> = (-4..9).map(|i| mirror_index(i, n)).collect();
        assert_eq!(got, vec![4, 3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0]);
        assert_eq!(mirror_index(-3, 1), 0);
        assert_eq!(mirror_index(3, 2), 1);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for &(s, r) in &[(0.5, 2), (1.0, 3), (2.7, 9)] {
            let k = gaussian_kernel(s, r);
            assert_eq!(k.len(), 2 * r + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..r {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn radius_is_at_least_one() {
        let p = GaussianParams::isotropic(0.1, 1.0);
        assert_eq!(p.radius([1.0, 1.0, 5.0]), [1, 1, 1]);
        let p = GaussianParams::isotropic(1.0, 3.0);
        assert_eq!(p.radius([1.0, 0.5, 2.0]), [3, 6, 2]);
    }

    #[test]
    fn constants_preserved() {
        let g = Geometry::new([5, 6, 7], [0.8, 1.0, 2.5]).unwrap();
        let v = Volume::new(g, vec![7.0; 210]).unwrap();
        let out = gaussian_denoise(&v, &GaussianParams::isotropic(1.3, 3.0)).unwrap();
        assert!(out.data().iter().all(|&x| (x - 7.0).abs() < 1e-9));
    }

    #[test]
    fn invalid_params_rejected() {
        let v = ramp([2, 2, 2]);
        assert!(gaussian_denoise(&v, &GaussianParams::isotropic(0.0, 3.0)).is_err());
        assert!(gaussian_denoise(&v, &GaussianParams::isotropic(1.0, -1.0)).is_err());
    }
}
