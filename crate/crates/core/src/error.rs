use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("unsupported dimensionality: {0} non-singleton dimensions (at most 3 allowed)")]
    Dimensionality(usize),

    #[error("grids are not aligned: {0}")]
    Alignment(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("mask has no foreground voxels")]
    EmptyMask,

    #[error("orientation is not axis aligned (oblique scans are not supported)")]
    UnsupportedOrientation,

    #[error("index out of range: {0}")]
    Range(String),

    #[error("degenerate region of interest: {0}")]
    DegenerateRoi(String),

    #[error("feature `{0}` is not finite")]
    NonFinite(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),

    #[error("parse error at {location}: {detail}")]
    Parse { location: String, detail: String },

    #[error("training data must contain both classes")]
    DegenerateLabels,

    #[error("stratification impossible: class {label} has {count} members but k = {k}")]
    Stratification { label: u8, count: usize, k: usize },

    #[error("unsupported model version {0}")]
    Version(u32),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
