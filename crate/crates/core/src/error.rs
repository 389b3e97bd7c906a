use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no safe set below the minimum of the safety function (u0={u0}, min={min})")]
    NoSafeSet { u0: f64, min: f64 },

    #[error("safety function did not converge after {sweeps} sweeps (residual {residual})")]
    NonConvergence {
        sweeps: usize,
        residual: f64,
        /// Last iterate, widened to f64.
        last: Vec<f64>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag used on the diagnostic stream.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NoSafeSet { .. } => "no_safe_set",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Invariant(_) => "invariant",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 for numerical non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
