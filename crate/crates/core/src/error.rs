use thiserror::Error;

/// Errors raised by the forecasting and assimilation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument broke the documented contract of the callee.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Input is well-formed but degenerate (zero mass, zero bandwidth, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A linear solve, factorization or quadrature produced unusable values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Observations carry (numerically) zero likelihood under the prior.
    #[error("data inconsistent with prior: {0}")]
    InconsistentData(String),
    /// Reading or writing a table failed.
    #[error("i/o: {0}")]
    Io(String),
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

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Same kind of error with `ctx` prefixed to its message.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{ctx}: {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::InconsistentData(m) => Error::InconsistentData(format!("{ctx}: {m}")),
            Error::Io(m) => Error::Io(format!("{ctx}: {m}")),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::InconsistentData(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
