//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors raised by mesh construction, solvers, optimization and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid user input: bad dimensions, unknown keys, inconsistent boundary data.
    #[error("configuration error: {0}")]
    Config(String),

    /// A scalar argument outside its admissible range (e.g. a density outside [0, 1]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Linear or nonlinear solver failure.
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// An element collapsed or inverted during a nonlinear solve.
    #[error("element {element} inverted (J = {jacobian:.3e})")]
    Inversion { element: usize, jacobian: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Broken internal contract such as a dimension mismatch.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the error class: config 2, numerical 3, I/O 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Numerical { .. } | Error::Inversion { .. } | Error::Internal(_) => 3,
            Error::Io { .. } => 4,
        }
    }

    /// Wraps the message with the optimization iteration at which it occurred.
    pub fn at_iteration(self, iter: usize) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("iteration {iter}: {m}")),
            Error::Domain(m) => Error::Domain(format!("iteration {iter}: {m}")),
            Error::Numerical { message, residual } => Error::Numerical {
                message: format!("iteration {iter}: {message}"),
                residual,
            },
            Error::Internal(m) => Error::Internal(format!("iteration {iter}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
