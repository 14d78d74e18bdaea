use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration key failed validation.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("singular point; use cell_self_energy")]
    SingularPoint,

    #[error("divergent integral: beta={beta} >= d={d}")]
    Divergent { d: usize, beta: f64 },

    #[error("embedding not approximately nonnegative; refine lattice (clamped mass {clamped_mass:.4e})")]
    Embedding { clamped_mass: f64 },

    #[error("blow-up/instability; reduce dt or amplitude (replica {replica}, step {step})")]
    Instability { replica: u64, step: usize },

    /// The noise coefficient vanishes along the mean path, so no CLT normalization exists.
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("empty region: no cell center inside radius {radius}")]
    EmptyRegion { radius: f64 },

    #[error("margin violation: L={available} < R+6*sqrt(T)={required}")]
    Margin { required: f64, available: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 statistical failure, 2 degenerate configuration,
    /// 3 numerical instability, 4 configuration or setup error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 2,
            Error::Instability { .. } => 3,
            Error::InvalidParameter(_)
            | Error::Config { .. }
            | Error::Divergent { .. }
            | Error::Embedding { .. }
            | Error::Margin { .. }
            | Error::EmptyRegion { .. }
            | Error::Io { .. } => 4,
            Error::SingularPoint | Error::InsufficientData(_) => 1,
        }
    }
}
