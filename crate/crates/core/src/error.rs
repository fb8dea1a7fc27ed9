use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix has eigenvalue {eigenvalue:e} below the negativity threshold")]
    Negativity { eigenvalue: f64 },

    #[error("matrix is not unitary (max |U U† - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory became unstable at step {step}: {reason}")]
    Unstable { step: u64, reason: String },

    #[error("all {n_trajectories} trajectories became unstable")]
    EnsembleFailure { n_trajectories: usize },

    #[error("malformed one-bit record: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
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
