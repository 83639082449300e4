use std::fmt;

/// Errors produced by the rate computations and the experiment harness.
#[derive(Debug)]
pub enum Error {
    /// Invalid input data (geometry, powers, probabilities, allocations).
    Domain(String),
    /// No feasible operating point exists (e.g. a reuse constraint removed
    /// every scheduled state).
    Infeasible(String),
    /// A numerical procedure failed to reach its accuracy target. Carries a
    /// description including the achieved error estimate where applicable.
    Numerical(String),
    /// A configuration file could not be parsed or validated.
    Config {
        line: Option<usize>,
        message: String,
    },
    /// Underlying I/O failure (unreadable config, unwritable output path).
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Config {
                line: Some(n),
                message,
            } => {
                write!(f, "config error (line {n}): {message}")
            }
            Error::Config {
                line: None,
                message,
            } => write!(f, "config error: {message}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
