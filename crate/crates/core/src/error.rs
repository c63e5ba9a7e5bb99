use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("support is empty: nothing to estimate ({0})")]
    EmptySupport(String),

    #[error("coefficient {0} is not in the selected support")]
    NotSelected(usize),

    #[error("objective is not finite at {context}")]
    NonFinite { context: String },

    #[error("matrix is singular or not positive definite ({context}; condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("{method} did not converge after {iterations} iterations (last gradient sup-norm {gradient_norm:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("every point on the penalty path failed: {0}")]
    PathFailed(String),

    #[error("bootstrap dropped {dropped} of {total} replications (counted before stopping), above the allowed fraction {allowed}; failing seeds: {seeds:?}")]
    BootstrapBudget {
        dropped: usize,
        total: usize,
        allowed: f64,
        seeds: Vec<u64>,
    },

    #[error("{0} is not available for this objective")]
    Unsupported(String),
}

impl Error {
    /// True for failures caused by the numerical procedure itself rather than
    /// by the data or configuration handed to it.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NonConvergence { .. })
    }
}
