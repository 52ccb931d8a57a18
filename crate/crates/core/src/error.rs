use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the imaging pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invariant of a configuration value does not hold.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("delay table needs {required} bytes, cap is {cap} bytes")]
    MemoryBudget { required: usize, cap: usize },

    /// A scatterer's echo does not fit in the sampled time window.
    #[error("scatterer at ({x:.4e}, {z:.4e}) m echoes outside the sampled window")]
    Fov { x: f64, z: f64 },

    /// No element falls inside the F-number aperture of a pixel.
    #[error("no active element for pixel at depth {depth:.4e} m with F# {f_number}")]
    DegenerateAperture { depth: f64, f_number: f64 },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("image is all zero")]
    AllZeroImage,

    /// Malformed RF file; `offset` is the byte position where reading failed.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
