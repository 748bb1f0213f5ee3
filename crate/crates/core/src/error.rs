use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants split into two families: input validation (bad arguments,
/// protocol violations, malformed files) and numerical failure (a search,
/// factorization or optimizer that could not deliver). [`Error::is_numerical`]
/// tells them apart, which the CLI maps onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("duplicate point at index {index} in a kernel point sequence")]
    DuplicatePoint { index: usize },

    #[error("length mismatch: {points} points but {coeffs} coefficients")]
    LengthMismatch { points: usize, coeffs: usize },

    #[error("protocol violation at round {round}: {reason}")]
    Protocol { round: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("search failed: {0}")]
    Search(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(
        "dual-norm solver did not converge after {iterations} iterations \
         (bracket [{lower:.6e}, {upper:.6e}])"
    )]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("root finder: {0}")]
    RootFinding(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Search(_)
                | Error::Factorization(_)
                | Error::NoConvergence { .. }
                | Error::RootFinding(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
