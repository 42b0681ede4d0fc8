//! Regular 3D grids with physical geometry.
//!
//! Voxels are stored x-fastest: the linear index of `(x, y, z)` is
//! `x + nx * (y + ny * z)`, which is also the on-disk order of NIfTI data.

use crate::error::{Error, Result};

/// Relative tolerance used when checking that two grids share a geometry.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-4;

/// Placement of a voxel grid in world (millimeter) coordinates.
///
/// The world position of index `i` is `origin + direction * diag(spacing) * i`.
/// Columns of `direction` are the world directions of the three index axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    /// Row-major 3x3 matrix; `direction[r][c]` is row `r`, column `c`.
    pub direction: [[f64; 3]; 3],
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl Geometry {
    /// Axis-aligned geometry at the world origin.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let g = Geometry {
            dims,
            spacing,
            origin: [0.0; 3],
            direction: IDENTITY,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_direction(mut self, direction: [[f64; 3]; 3]) -> Result<Self> {
        self.direction = direction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid(format!("zero extent in dims {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be strictly positive, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin is not finite".into()));
        }
        let det = determinant(&self.direction);
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::InvalidGrid("orientation matrix is singular".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// World position of a (possibly fractional) voxel index.
    pub fn index_to_world(&self, idx: [f64; 3]) -> [f64; 3] {
        let mut w = self.origin;
        for (r, wr) in w.iter_mut().enumerate() {
            for c in 0..3 {
                *wr += self.direction[r][c] * self.spacing[c] * idx[c];
            }
        }
        w
    }

    /// Volume of a single voxel in cubic millimeters.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Checks dims, spacing and orientation agreement within
    /// [`ALIGNMENT_TOLERANCE`].
    pub fn check_aligned(&self, other: &Geometry) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Alignment(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        for a in 0..3 {
            let (s, t) = (self.spacing[a], other.spacing[a]);
            if (s - t).abs() > ALIGNMENT_TOLERANCE * s.abs().max(t.abs()) {
                return Err(Error::Alignment(format!(
                    "spacing {:?} vs {:?}",
                    self.spacing, other.spacing
                )));
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                if (self.direction[r][c] - other.direction[r][c]).abs() > ALIGNMENT_TOLERANCE {
                    return Err(Error::Alignment("orientation matrices differ".into()));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// A voxel grid carrying its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    geometry: Geometry,
    data: Vec<T>,
}

/// CT intensities, always held as 64-bit reals.
pub type Volume = Grid<f64>;

/// Binary segmentation; `true` is foreground.
pub type Mask = Grid<bool>;

impl<T> Grid<T> {
    pub fn new(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::InvalidGrid(format!(
                "{} voxels supplied for dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Grid { geometry, data })
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        geometry.validate()?;
        let [nx, ny, nz] = geometry.dims;
        let mut data = Vec::with_capacity(geometry.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Grid { geometry, data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.geometry.index(x, y, z)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn from_parts(geometry: Geometry, data: Vec<T>) -> Self {
        debug_assert_eq!(geometry.len(), data.len());
        Grid { geometry, data }
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pairs this mask with a volume, enforcing geometric alignment.
    pub fn check_aligned_with<T>(&self, other: &Grid<T>) -> Result<()> {
        self.geometry.check_aligned(&other.geometry)
    }
}
