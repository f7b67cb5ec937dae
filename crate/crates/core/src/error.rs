//! Error type shared by every module of the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the geometric and numerical operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument left the mathematical domain of an operation
    /// (negative radius, degenerate cylinder, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter combination is inconsistent with the operation's
    /// preconditions (e.g. `d0 >= 1/L` for the boundary barrier).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A quadrature or nonlinear solve did not reach its tolerance.
    /// `residual` is the best error estimate at the point of failure.
    #[error("numeric error: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// The adaptive ODE integrator failed; `last` is the last valid
    /// value of the leading state component.
    #[error("ode step failure: {message} (last valid state {last})")]
    OdeStep { message: String, last: f64 },

    /// The explicit flow left the instability guard envelope. The partial
    /// trace up to `t` is still flushed by the caller.
    #[error("flow instability at t={t}: sup|u|={sup_u:e}, sup W={sup_w:e}")]
    Instability { t: f64, sup_u: f64, sup_w: f64 },

    /// A scheme/grid combination that the solver does not support.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Expression-grammar parse failure for custom profiles.
    #[error("expression parse error at byte {at}: {message}")]
    Parse { at: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            residual,
        }
    }
}
