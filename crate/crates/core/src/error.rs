use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed grid header in {path}: {message}")]
    MalformedHeader { path: PathBuf, message: String },

    #[error("non-numeric value {token:?} at line {line} of {path}")]
    NonNumeric {
        path: PathBuf,
        line: usize,
        token: String,
    },

    #[error("inconsistent row length at line {line} of {path}: expected {expected}, found {found}")]
    InconsistentRowLength {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("grid is not square ({rows} rows x {cols} columns)")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("lower water body mask is empty")]
    EmptyLowerMask,

    #[error("no cell lies below water elevation {water_elevation}; head infeasible for this terrain")]
    EmptyInterior { water_elevation: f64 },

    #[error("no cell can carry an embankment around the interior candidates")]
    EmptyPerimeter,

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error(
        "volume target {required:.1} m3 exceeds the capacity {capacity:.1} m3 of all eligible interior cells"
    )]
    VolumeInfeasible { required: f64, capacity: f64 },

    #[error("perimeter candidate set too small for a tour ({found} < 3)")]
    TourTooSmall { found: usize },

    #[error("variable {name} has fractional value {value}")]
    IntegralityViolation { name: String, value: f64 },

    #[error("incumbent is not a reservoir: {0}")]
    InvalidIncumbent(String),

    #[error("search space too large: {cells} candidate cells exceed limit {limit}")]
    SearchSpaceTooLarge { cells: usize, limit: usize },

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("model file parse error at line {line}: {message}")]
    ModelParse { line: usize, message: String },

    #[error("model export failed: {0}")]
    Export(String),

    #[error("no incumbent found: {0}")]
    NoIncumbent(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
