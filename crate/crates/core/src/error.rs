use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image of {width}x{height} pixels is too small for a {rows}x{cols} grid")]
    DimensionTooSmall {
        width: usize,
        height: usize,
        rows: usize,
        cols: usize,
    },

    #[error("region index {index} out of range for {count} regions")]
    RegionOutOfRange { index: usize, count: usize },

    #[error("region {0} appears more than once")]
    DuplicateRegion(usize),

    #[error("need at least {needed} distinct patches, found {found}")]
    InsufficientPatches { needed: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("all {0} regions already acquired")]
    AllRegionsAcquired(usize),

    #[error("empty training set: {0}")]
    EmptyDataset(String),

    #[error("label {label} out of range for {n_outputs} outputs")]
    LabelOutOfRange { label: usize, n_outputs: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible input: {0}")]
    Incompatible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing image file {path} (manifest line {line})")]
    MissingFile { path: PathBuf, line: usize },

    #[error("malformed PGM {path}: {reason}")]
    MalformedPgm { path: PathBuf, reason: String },

    #[error("malformed manifest {path} line {line}: {reason}")]
    MalformedManifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("manifest {0} has no entries")]
    EmptyManifest(PathBuf),

    #[error("unsupported bundle format version {found} (expected {expected})")]
    BundleVersion { found: u64, expected: u64 },

    #[error("cannot parse bundle: {0}")]
    BundleParse(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
