use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A precondition on the inputs (Hermiticity, conservation, ...) does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical check failed (residual above tolerance).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The integrator produced a state violating density-matrix invariants.
    #[error("integration failed at t = {time} ns: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    /// The requested choice is not uniquely determined by the inputs.
    #[error("ambiguous: {0}")]
    Ambiguity(String),

    /// Malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::IntegrationFailure { .. })
    }
}
