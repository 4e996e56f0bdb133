use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant (named key, explanation).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Config file parse failure with the offending key and line.
    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    /// A covariance matrix failed its PSD factorization.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// Linear system or bisection could not be solved.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// Solver state from which no progress is possible (caller may restart).
    #[error("degenerate solver state: {0}")]
    DegenerateState(String),

    /// Matrix dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed matrix file {path}: {msg}")]
    MatrixFile { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
