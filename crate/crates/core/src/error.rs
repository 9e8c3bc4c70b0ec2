use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {message} (matrix {fingerprint})")]
    Numerical { message: String, fingerprint: String },

    #[error("system too large for exact diagonalization: {n_sites} sites (max {max})")]
    Size { n_sites: usize, max: usize },

    #[error("degenerate ground state: gap {gap:.3e} below {threshold:.1e}")]
    Degenerate { gap: f64, threshold: f64 },

    #[error("spectral gap closed at momentum {momentum:.6}")]
    GapClosed { momentum: f64 },

    #[error("grid point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, fingerprint: impl Into<String>) -> Self {
        Error::Numerical {
            message: msg.into(),
            fingerprint: fingerprint.into(),
        }
    }

    pub(crate) fn at(index: usize, source: Error) -> Self {
        Error::AtPoint {
            index,
            source: Box::new(source),
        }
    }
}
