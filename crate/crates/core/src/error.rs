use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid case id {0:?}")]
    InvalidCaseId(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("bad NIfTI header: {0}")]
    BadHeader(String),

    #[error("bad NIfTI magic {0:?}, expected \"n+1\\0\"")]
    BadMagic([u8; 4]),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("truncated data section: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("non-positive voxel spacing {0:?}")]
    NonPositiveSpacing([f64; 3]),

    #[error("voxel {index} has value {value}, which is not a label in {{0,1,2,3}}")]
    InvalidLabel { index: usize, value: f64 },

    #[error("need at least {required} voxels in the included set, found {found}")]
    TooFewVoxels { found: usize, required: usize },

    #[error("degenerate intensity spread ({0:e})")]
    DegenerateSpread(f64),

    #[error("no raters supplied")]
    NoRaters,

    #[error("no predictions supplied")]
    NoPredictions,

    #[error("no case reports to aggregate")]
    EmptyCohort,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
