use thiserror::Error;

/// Errors produced by the pricing library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A parameter failed validation. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// A time lookup fell outside the interval covered by a path.
    #[error("time {t} outside covered interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// An operation needed path data on `[need_start, need_end]` but the
    /// path only covers `[start, end]`.
    #[error(
        "path covers [{start}, {end}] but [{need_start}, {need_end}] is required"
    )]
    CoverageViolation {
        need_start: f64,
        need_end: f64,
        start: f64,
        end: f64,
    },

    /// An explicit Euler step produced a nonpositive firm value. Callers can
    /// retry with the log-Euler scheme, which is positive by construction.
    #[error("simulation produced nonpositive value at step {step}; consider the log-euler scheme")]
    SimulationFailure { step: usize },

    /// The requested configuration is not supported by this operation.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Closed-form, PDE, and heat-transform pricers require the horizon
    /// T - t to fit inside the observation delay so the volatility path is
    /// fully determined by history.
    #[error("horizon T-t = {tau} exceeds the validity window l2 = {l2}; use the Monte Carlo route")]
    WindowViolation { tau: f64, l2: f64 },

    /// A linear solve or quadrature lost stability.
    #[error("numerical instability: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }
}
