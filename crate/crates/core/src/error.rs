use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {given}")]
    DimensionMismatch { expected: usize, given: usize },

    #[error("point {index} lies outside the open domain of {space}")]
    OutsideDomain { space: String, index: usize },

    #[error("duplicate point at positions {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },

    #[error("kernel singularity: |1 - <z, a>| = {0:e}")]
    Singularity(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("space mismatch: expected {expected}, got {given}")]
    SpaceMismatch { expected: String, given: String },

    #[error("the point sequence is empty")]
    EmptySequence,

    #[error("operation `{op}` is not supported on {space}")]
    UnsupportedSpace { op: &'static str, space: String },

    #[error("spectral bounds need p = 2 (got p = {0}); use frame::frame_bounds for other exponents")]
    WrongMethod(f64),

    #[error("exponent {0} is not supported here (need q > 1)")]
    UnsupportedExponent(f64),

    #[error("length mismatch: expected {expected}, got {given}")]
    LengthMismatch { expected: usize, given: usize },

    #[error("degenerate configuration: condition number {condition:e} exceeds {threshold:e}")]
    Degenerate { condition: f64, threshold: f64 },

    #[error("sampling saturated after {attempts} attempts ({placed} of {requested} points placed); reduce the count or the separation")]
    Saturation {
        attempts: usize,
        placed: usize,
        requested: usize,
    },

    #[error("density calibration failed: {reason}\n{trace}")]
    Calibration { reason: String, trace: String },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate { .. } | Error::Singularity(_) => 3,
            Error::Calibration { .. } => 4,
            Error::Io { .. } => 5,
            _ => 2,
        }
    }
}
