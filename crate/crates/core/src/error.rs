use thiserror::Error;

/// Errors raised by the model and its estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid arrival trace: {0}")]
    InvalidTrace(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no sign change of the mean/variance gap found for a = λτ in (0, {max_a}]")]
    RootNotFound { max_a: f64 },

    #[error("excitation never dropped by 3 dB within the swept photon numbers (max {max_n})")]
    NotSaturating { max_n: f64 },

    #[error("least-squares fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("empty sweep")]
    EmptySweep,

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
