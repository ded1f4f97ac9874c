use thiserror::Error;

/// Errors produced anywhere in the recovery pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data: collected {collected} suitable frames, {required} required")]
    InsufficientData { collected: usize, required: usize },

    #[error("degenerate threshold: no symbol can be unreliable (p_u = 0)")]
    DegenerateThreshold,

    #[error("infeasible filter: acceptance probability F(t2; n, p_u) is zero")]
    InfeasibleFilter,

    #[error(
        "infeasible budget: no grid point reaches acceptance probability {required:.6}; \
         the largest achievable value is {max_achievable:.6}"
    )]
    InfeasibleBudget { required: f64, max_achievable: f64 },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
