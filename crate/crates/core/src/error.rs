use thiserror::Error;

/// Failure modes shared by every module of the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An operation was asked to work outside the parameter set where it is defined.
    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// A requested table or lattice exceeds the configured memory guard.
    #[error("{what}: {requested} entries requested, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    /// The regressor Gram matrix failed the relative singularity test.
    #[error("singular regressor matrix: |det| = {det:e} <= {threshold:e}")]
    SingularMatrix { det: f64, threshold: f64 },

    /// A statistic needing the innovations was requested from noise-free accumulators.
    #[error("innovation-weighted statistics are absent; accumulate with noise first")]
    MissingNoise,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A truncated series did not reach the requested tolerance before its cap.
    #[error("series did not converge by K = {k} (error estimate {error_estimate:e}, tolerance {tol:e})")]
    NonConvergence {
        k: usize,
        error_estimate: f64,
        tol: f64,
    },

    /// Too many Monte Carlo replicates had to be discarded.
    #[error("{excluded} of {total} replicates excluded (limit 1%)")]
    TooManyExcluded { excluded: usize, total: usize },

    /// Malformed or schema-violating configuration text.
    #[error("config line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(op: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::Domain {
        op,
        reason: reason.into(),
    })
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
