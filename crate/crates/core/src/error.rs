use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("degenerate horizon: {0}")]
    DegenerateHorizon(String),

    #[error("mask value {0} has zero probability mass")]
    NoMass(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("phase violation: {0}")]
    PhaseViolation(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("samples are not linearly realizable for bit {bit}")]
    RealizabilityViolation { bit: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by a bad configuration rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument { .. } | Error::Json(_) | Error::DegenerateHorizon(_)
        )
    }
}
