//! NIfTI-1 single-file (`.nii`, optionally gzip-compressed) reader and writer.
//!
//! Only the fields the pipeline needs are interpreted. Byte order is detected
//! from `dim[0]`, which must lie in `1..=7` in the file's native order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::grid::{determinant, Geometry, Grid, Mask, Volume, IDENTITY};

pub const HEADER_SIZE: usize = 348;
/// Header plus the four-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

/// On-disk voxel types the reader accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
    UInt16,
}

impl Datatype {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::UInt8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            512 => Datatype::UInt16,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::UInt8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
            Datatype::UInt16 => 512,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::UInt8 => 1,
            Datatype::Int16 | Datatype::UInt16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }

    pub fn bitpix(self) -> i16 {
        (self.size() * 8) as i16
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, Datatype::Float32 | Datatype::Float64)
    }

    fn range(self) -> (f64, f64) {
        match self {
            Datatype::UInt8 => (0.0, u8::MAX as f64),
            Datatype::Int16 => (i16::MIN as f64, i16::MAX as f64),
            Datatype::UInt16 => (0.0, u16::MAX as f64),
            Datatype::Int32 => (i32::MIN as f64, i32::MAX as f64),
            Datatype::Float32 => (f32::MIN as f64, f32::MAX as f64),
            Datatype::Float64 => (f64::MIN, f64::MAX),
        }
    }
}

/// The subset of the 348-byte NIfTI-1 header used by this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

impl Default for NiftiHeader {
    fn default() -> Self {
        NiftiHeader {
            dim: [3, 1, 1, 1, 1, 1, 1, 1],
            datatype: Datatype::Float32.code(),
            bitpix: Datatype::Float32.bitpix(),
            pixdim: [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            vox_offset: DEFAULT_VOX_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            xyzt_units: 2,
            qform_code: 0,
            sform_code: 0,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            magic: MAGIC_SINGLE,
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    order: Endianness,
}

impl Reader<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        match self.order {
            Endianness::Little => i16::from_le_bytes(b),
            Endianness::Big => i16::from_be_bytes(b),
        }
    }

    fn i32(&self, off: usize) -> i32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        match self.order {
            Endianness::Little => i32::from_le_bytes(b),
            Endianness::Big => i32::from_be_bytes(b),
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        match self.order {
            Endianness::Little => f32::from_le_bytes(b),
            Endianness::Big => f32::from_be_bytes(b),
        }
    }
}

impl NiftiHeader {
    /// Parses a header, returning it with the detected byte order.
    pub fn parse(bytes: &[u8]) -> Result<(Self, Endianness)> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Format {
                field: "sizeof_hdr",
                detail: format!("file has only {} bytes", bytes.len()),
            });
        }
        let dim0_le = i16::from_le_bytes([bytes[offsets::DIM], bytes[offsets::DIM + 1]]);
        let dim0_be = i16::from_be_bytes([bytes[offsets::DIM], bytes[offsets::DIM + 1]]);
        let order = if (1..=7).contains(&dim0_le) {
            Endianness::Little
        } else if (1..=7).contains(&dim0_be) {
            Endianness::Big
        } else {
            return Err(Error::Format {
                field: "dim",
                detail: format!("dim[0] = {dim0_le} is outside 1..=7 in either byte order"),
            });
        };
        let r = Reader { bytes, order };

        let sizeof_hdr = r.i32(offsets::SIZEOF_HDR);
        if sizeof_hdr != HEADER_SIZE as i32 {
            return Err(Error::Format {
                field: "sizeof_hdr",
                detail: format!("expected 348, found {sizeof_hdr}"),
            });
        }
        let magic: [u8; 4] = bytes[offsets::MAGIC..offsets::MAGIC + 4].try_into().unwrap();
        if magic != MAGIC_SINGLE {
            return Err(Error::Format {
                field: "magic",
                detail: format!("expected \"n+1\", found {:?}", String::from_utf8_lossy(&magic)),
            });
        }

        let mut dim = [0i16; 8];
        for (i, d) in dim.iter_mut().enumerate() {
            *d = r.i16(offsets::DIM + 2 * i);
        }
        let mut pixdim = [0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = r.f32(offsets::PIXDIM + 4 * i);
        }
        let mut srow = [[0f32; 4]; 3];
        for (row, s) in srow.iter_mut().enumerate() {
            for (col, v) in s.iter_mut().enumerate() {
                *v = r.f32(offsets::SROW_X + 16 * row + 4 * col);
            }
        }
        let header = NiftiHeader {
            dim,
            datatype: r.i16(offsets::DATATYPE),
            bitpix: r.i16(offsets::BITPIX),
            pixdim,
            vox_offset: r.f32(offsets::VOX_OFFSET),
            scl_slope: r.f32(offsets::SCL_SLOPE),
            scl_inter: r.f32(offsets::SCL_INTER),
            xyzt_units: bytes[offsets::XYZT_UNITS],
            qform_code: r.i16(offsets::QFORM_CODE),
            sform_code: r.i16(offsets::SFORM_CODE),
            quatern: [
                r.f32(offsets::QUATERN_B),
                r.f32(offsets::QUATERN_B + 4),
                r.f32(offsets::QUATERN_B + 8),
            ],
            qoffset: [
                r.f32(offsets::QOFFSET_X),
                r.f32(offsets::QOFFSET_X + 4),
                r.f32(offsets::QOFFSET_X + 8),
            ],
            srow,
            magic,
        };
        Ok((header, order))
    }

    /// Serializes to exactly [`HEADER_SIZE`] bytes.
    pub fn to_bytes(&self, order: Endianness) -> Vec<u8> {
        let mut b = vec![0u8; HEADER_SIZE];
        let mut put = |off: usize, bytes: &[u8]| b[off..off + bytes.len()].copy_from_slice(bytes);
        macro_rules! enc {
            ($v:expr) => {
                match order {
                    Endianness::Little => $v.to_le_bytes(),
                    Endianness::Big => $v.to_be_bytes(),
                }
            };
        }
        put(offsets::SIZEOF_HDR, &enc!(HEADER_SIZE as i32));
        for (i, d) in self.dim.iter().enumerate() {
            put(offsets::DIM + 2 * i, &enc!(*d));
        }
        put(offsets::DATATYPE, &enc!(self.datatype));
        put(offsets::BITPIX, &enc!(self.bitpix));
        for (i, p) in self.pixdim.iter().enumerate() {
            put(offsets::PIXDIM + 4 * i, &enc!(*p));
        }
        put(offsets::VOX_OFFSET, &enc!(self.vox_offset));
        put(offsets::SCL_SLOPE, &enc!(self.scl_slope));
        put(offsets::SCL_INTER, &enc!(self.scl_inter));
        put(offsets::XYZT_UNITS, &[self.xyzt_units]);
        put(offsets::QFORM_CODE, &enc!(self.qform_code));
        put(offsets::SFORM_CODE, &enc!(self.sform_code));
        for i in 0..3 {
            put(offsets::QUATERN_B + 4 * i, &enc!(self.quatern[i]));
            put(offsets::QOFFSET_X + 4 * i, &enc!(self.qoffset[i]));
        }
        for (row, s) in self.srow.iter().enumerate() {
            for (col, v) in s.iter().enumerate() {
                put(offsets::SROW_X + 16 * row + 4 * col, &enc!(*v));
            }
        }
        put(offsets::MAGIC, &self.magic);
        b
    }

    /// Spatial dims, rejecting data with more than three non-singleton axes.
    fn spatial_dims(&self) -> Result<[usize; 3]> {
        let n = self.dim[0] as usize;
        let mut dims = [1usize; 3];
        let mut extra = 0usize;
        for i in 1..=n {
            let d = self.dim[i];
            if d < 1 {
                return Err(Error::Format {
                    field: "dim",
                    detail: format!("dim[{i}] = {d} must be positive"),
                });
            }
            if i <= 3 {
                dims[i - 1] = d as usize;
            } else if d > 1 {
                extra += 1;
            }
        }
        if extra > 0 {
            let spatial = dims.iter().filter(|&&d| d > 1).count();
            return Err(Error::Dimensionality(spatial + extra));
        }
        Ok(dims)
    }

    fn geometry(&self, dims: [usize; 3]) -> Result<Geometry> {
        let mut pixdim = [1.0f64; 3];
        for (a, p) in pixdim.iter_mut().enumerate() {
            let v = self.pixdim[a + 1] as f64;
            if a < self.dim[0] as usize {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Format {
                        field: "pixdim",
                        detail: format!("pixdim[{}] = {v} must be positive", a + 1),
                    });
                }
                *p = v;
            } else if v > 0.0 && v.is_finite() {
                *p = v;
            }
        }

        if self.sform_code > 0 {
            let mut spacing = [0.0; 3];
            let mut direction = [[0.0; 3]; 3];
            for c in 0..3 {
                let col: Vec<f64> = (0..3).map(|r| self.srow[r][c] as f64).collect();
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::Format {
                        field: "srow",
                        detail: format!("column {c} of the sform affine is degenerate"),
                    });
                }
                spacing[c] = norm;
                for r in 0..3 {
                    direction[r][c] = col[r] / norm;
                }
            }
            let origin = [self.srow[0][3] as f64, self.srow[1][3] as f64, self.srow[2][3] as f64];
            return finish_geometry(dims, spacing, origin, direction, "srow");
        }
        if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(|v| v as f64);
            let mut a = 1.0 - (b * b + c * c + d * d);
            let (b, c, d) = if a < 1e-7 {
                // Rotation by 180 degrees; renormalize the vector part.
                let n = (b * b + c * c + d * d).sqrt();
                a = 0.0;
                (b / n, c / n, d / n)
            } else {
                a = a.sqrt();
                (b, c, d)
            };
            let mut r = [
                [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
                [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
                [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
            ];
            let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
            for row in r.iter_mut() {
                row[2] *= qfac;
            }
            let origin = self.qoffset.map(|v| v as f64);
            return finish_geometry(dims, pixdim, origin, r, "quatern");
        }
        finish_geometry(dims, pixdim, [0.0; 3], IDENTITY, "pixdim")
    }
}

fn finish_geometry(
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    direction: [[f64; 3]; 3],
    field: &'static str,
) -> Result<Geometry> {
    let g = Geometry {
        dims,
        spacing,
        origin,
        direction,
    };
    g.validate().map_err(|e| Error::Format {
        field,
        detail: e.to_string(),
    })?;
    Ok(g)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Decodes raw voxel bytes to reals, applying the header's intensity scaling.
fn decode_voxels(header: &NiftiHeader, order: Endianness, payload: &[u8], n: usize) -> Result<Vec<f64>> {
    let dtype = Datatype::from_code(header.datatype)?;
    if header.bitpix != dtype.bitpix() {
        return Err(Error::Format {
            field: "bitpix",
            detail: format!("{} does not match datatype {}", header.bitpix, header.datatype),
        });
    }
    let size = dtype.size();
    if payload.len() < n * size {
        return Err(Error::Format {
            field: "vox_offset",
            detail: format!("need {} bytes of voxel data, found {}", n * size, payload.len()),
        });
    }
    macro_rules! decode {
        ($t:ty) => {{
            payload[..n * size]
                .chunks_exact(size)
                .map(|c| {
                    let b = c.try_into().unwrap();
                    (match order {
                        Endianness::Little => <$t>::from_le_bytes(b),
                        Endianness::Big => <$t>::from_be_bytes(b),
                    }) as f64
                })
                .collect::<Vec<f64>>()
        }};
    }
    let mut values = match dtype {
        Datatype::UInt8 => payload[..n].iter().map(|&v| v as f64).collect(),
        Datatype::Int16 => decode!(i16),
        Datatype::UInt16 => decode!(u16),
        Datatype::Int32 => decode!(i32),
        Datatype::Float32 => decode!(f32),
        Datatype::Float64 => decode!(f64),
    };
    let slope = header.scl_slope as f64;
    let inter = header.scl_inter as f64;
    if slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0) {
        let inter = if inter.is_finite() { inter } else { 0.0 };
        for v in values.iter_mut() {
            *v = *v * slope + inter;
        }
    }
    Ok(values)
}

/// Parses an in-memory NIfTI-1 image.
pub fn volume_from_bytes(bytes: &[u8]) -> Result<Volume> {
    let (header, order) = NiftiHeader::parse(bytes)?;
    let dims = header.spatial_dims()?;
    // Datatype errors take precedence over geometry errors.
    Datatype::from_code(header.datatype)?;
    let geometry = header.geometry(dims)?;
    let offset = header.vox_offset;
    if !(offset >= HEADER_SIZE as f32) || !offset.is_finite() {
        return Err(Error::Format {
            field: "vox_offset",
            detail: format!("{offset} lies inside the header"),
        });
    }
    let offset = offset as usize;
    let payload = bytes.get(offset..).unwrap_or(&[]);
    let voxels = decode_voxels(&header, order, payload, geometry.len())?;
    Ok(Grid::from_parts(geometry, voxels))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    volume_from_bytes(&read_file(path)?)
}

/// Loads a mask; voxels strictly greater than 0.5 are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Ok(binarize(&load_volume(path)?))
}

pub fn binarize(v: &Volume) -> Mask {
    v.map(|&x| x > 0.5)
}

/// Quaternion parameters `(b, c, d)` and `qfac` of an orthonormal direction
/// matrix, or `None` when the matrix is not orthonormal.
fn quaternion_of(direction: &[[f64; 3]; 3]) -> Option<([f64; 3], f64)> {
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|r| direction[r][i] * direction[r][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - expect).abs() > 1e-6 {
                return None;
            }
        }
    }
    let mut r = *direction;
    let qfac = if determinant(&r) < 0.0 {
        for row in r.iter_mut() {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let trace = r[0][0] + r[1][1] + r[2][2] + 1.0;
    let (a, mut b, mut c, mut d);
    if trace > 0.5 {
        a = 0.5 * trace.sqrt();
        b = 0.25 * (r[2][1] - r[1][2]) / a;
        c = 0.25 * (r[0][2] - r[2][0]) / a;
        d = 0.25 * (r[1][0] - r[0][1]) / a;
    } else {
        let xd = 1.0 + r[0][0] - (r[1][1] + r[2][2]);
        let yd = 1.0 + r[1][1] - (r[0][0] + r[2][2]);
        let zd = 1.0 + r[2][2] - (r[0][0] + r[1][1]);
        if xd > 1.0 {
            b = 0.5 * xd.sqrt();
            c = 0.25 * (r[0][1] + r[1][0]) / b;
            d = 0.25 * (r[0][2] + r[2][0]) / b;
            a = 0.25 * (r[2][1] - r[1][2]) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd.sqrt();
            b = 0.25 * (r[0][1] + r[1][0]) / c;
            d = 0.25 * (r[1][2] + r[2][1]) / c;
            a = 0.25 * (r[0][2] - r[2][0]) / c;
        } else {
            d = 0.5 * zd.sqrt();
            b = 0.25 * (r[0][2] + r[2][0]) / d;
            c = 0.25 * (r[1][2] + r[2][1]) / d;
            a = 0.25 * (r[1][0] - r[0][1]) / d;
        }
        if a < 0.0 {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    Some(([b, c, d], qfac))
}

/// Builds the header describing `geometry` stored as `dtype`.
pub fn header_for(geometry: &Geometry, dtype: Datatype) -> NiftiHeader {
    let [nx, ny, nz] = geometry.dims;
    let mut h = NiftiHeader {
        dim: [3, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1],
        datatype: dtype.code(),
        bitpix: dtype.bitpix(),
        ..NiftiHeader::default()
    };
    h.pixdim[1] = geometry.spacing[0] as f32;
    h.pixdim[2] = geometry.spacing[1] as f32;
    h.pixdim[3] = geometry.spacing[2] as f32;
    for r in 0..3 {
        for c in 0..3 {
            h.srow[r][c] = (geometry.direction[r][c] * geometry.spacing[c]) as f32;
        }
        h.srow[r][3] = geometry.origin[r] as f32;
    }
    h.sform_code = 1;
    if let Some((quatern, qfac)) = quaternion_of(&geometry.direction) {
        h.qform_code = 1;
        h.quatern = quatern.map(|v| v as f32);
        h.qoffset = geometry.origin.map(|v| v as f32);
        h.pixdim[0] = qfac as f32;
    }
    h
}

/// Encodes voxels as `dtype`, rejecting values the type cannot hold.
fn encode_voxels(values: &[f64], dtype: Datatype) -> Result<Vec<u8>> {
    let (lo, hi) = dtype.range();
    let mut out = Vec::with_capacity(values.len() * dtype.size());
    for &v in values {
        let v = if dtype.is_integer() { v.round() } else { v };
        if !(v >= lo && v <= hi) {
            return Err(Error::InvalidParam(format!(
                "voxel value {v} does not fit datatype {dtype:?}"
            )));
        }
        match dtype {
            Datatype::UInt8 => out.push(v as u8),
            Datatype::Int16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            Datatype::UInt16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            Datatype::Int32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            Datatype::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Datatype::Float64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    Ok(out)
}

/// Writes a header and raw little-endian voxel payload. Paths ending in
/// `.gz` are gzip-compressed.
pub fn write_raw(path: impl AsRef<Path>, header: &NiftiHeader, order: Endianness, payload: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = header.to_bytes(order);
    let offset = header.vox_offset.max(HEADER_SIZE as f32) as usize;
    bytes.resize(offset, 0);
    bytes.extend_from_slice(payload);
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = GzEncoder::new(f, Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
        Ok(())
    } else {
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>, dtype: Datatype) -> Result<()> {
    let header = header_for(volume.geometry(), dtype);
    let payload = encode_voxels(volume.data(), dtype)?;
    write_raw(path, &header, Endianness::Little, &payload)
}

/// Writes a mask as `uint8` zeros and ones.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let header = header_for(mask.geometry(), Datatype::UInt8);
    let payload: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    write_raw(path, &header, Endianness::Little, &payload)
}
