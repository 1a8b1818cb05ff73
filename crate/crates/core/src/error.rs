use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoexError {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite value while evaluating {quantity}")]
    NonFinite { quantity: &'static str },

    #[error("fixed point for {quantity} did not converge (residual {residual:e})")]
    NoConvergence {
        quantity: &'static str,
        residual: f64,
    },

    #[error("matrix row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("linear system is singular or has more than one stationary solution")]
    Singular,

    #[error(
        "simulation budget too small: {post_warmup} post-warmup epochs, need at least {required}"
    )]
    SimBudget { post_warmup: u64, required: u64 },
}

impl CoexError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CoexError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = CoexError> = std::result::Result<T, E>;
