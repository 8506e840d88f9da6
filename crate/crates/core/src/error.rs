use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("profile length mismatch: density {density}, modulus {modulus}, damping {damping}")]
    LengthMismatch {
        density: usize,
        modulus: usize,
        damping: usize,
    },

    #[error("nonpositive {what} at element {index}: {value}")]
    NonPositiveProfile {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("near-singular defect determinant {det:e} (j = {index}, k* = {stiffness}, s = {s})")]
    NearSingularDeterminant {
        index: usize,
        stiffness: f64,
        s: f64,
        det: f64,
    },

    #[error("singular matrix: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("integration became unstable at t = {t}: |x1| = {value:e}")]
    UnstableStep { t: f64, value: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("Laplace truncation bound {bound:e} exceeds tolerance {tolerance:e} at s = {s}")]
    TailTooLarge { s: f64, bound: f64, tolerance: f64 },

    #[error("malformed measurement file (line {line}): {reason}")]
    MalformedFile { line: usize, reason: String },

    #[error("unsupported measurement file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("configuration error in {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
