use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("large-scale coefficient beta[{ap}][{user}] is not strictly positive")]
    ZeroBeta { ap: usize, user: usize },

    /// The receive vector of `user` is (numerically) orthogonal to its own
    /// estimated-channel vector.
    #[error("degenerate receive beam for user {user}: |u^T nu_kk|^2 = {gain:e}")]
    DegenerateBeam { user: usize, gain: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
