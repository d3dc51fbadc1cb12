use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A type invariant does not hold (non-monotone sorption curve, non-positive storage, ...).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// The time integrator gave up. `t_last` is the last time (s) reached with a valid state.
    #[error("solver failure at t = {t_last:.6e} s: {reason}")]
    SolverFailure { t_last: f64, reason: String },

    /// The sensitivity of the observation to a parameter vanishes, so its
    /// distribution cannot be inferred from the observation.
    #[error("degenerate sensitivity: parameter is locally unidentifiable")]
    DegenerateSensitivity,

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure { .. } | Error::Estimation(_) | Error::DegenerateSensitivity
        )
    }
}
