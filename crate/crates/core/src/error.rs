use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("root not bracketed: {0}")]
    NoBracket(String),

    #[error("Newton iteration did not converge at t = {t} (max change {change:e} after {iters} iterations)")]
    NewtonFailed { t: f64, iters: usize, change: f64 },

    #[error("solution left [-0.05, 1.05] at t = {t} (u = {value})")]
    InstabilityDetected { t: f64, value: f64 },

    #[error("trajectory did not reach U = 0 within {steps} steps")]
    NoCrossing { steps: usize },

    #[error("kappa = {kappa} is not bracketed by the wave-speed map on [{c_lo}, {c_hi}]")]
    NotBracketed { kappa: f64, c_lo: f64, c_hi: f64 },

    #[error("outside the regime of validity: {0}")]
    Regime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
