use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("coordinate outside projection domain: {0}")]
    OutOfDomain(String),

    #[error("unknown or unsupported CRS: {0}")]
    UnknownCrs(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("no scenes found under {0}")]
    NoScenesFound(String),

    #[error("query {0} does not intersect dataset bounds")]
    QueryOutsideBounds(String),

    #[error("patch {patch} larger than sampling extent {extent}")]
    PatchLargerThanExtent { patch: String, extent: String },

    #[error("patch larger than every scene footprint")]
    PatchLargerThanScene,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable numeric code, shared with the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::EmptyIntersection(_) => 1,
            Error::OutOfDomain(_) => 2,
            Error::UnknownCrs(_) => 3,
            Error::UnsupportedFormat(_) => 4,
            Error::CorruptFile(_) => 5,
            Error::Io { .. } => 6,
            Error::Parse(_) => 7,
            Error::UnsupportedGeometry(_) => 8,
            Error::NoScenesFound(_) => 9,
            Error::QueryOutsideBounds(_) => 10,
            Error::PatchLargerThanExtent { .. } => 11,
            Error::PatchLargerThanScene => 12,
            Error::InvalidArgument(_) => 13,
            Error::Config(_) => 14,
        }
    }
}
