use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CSV header: {0}")]
    MalformedHeader(String),

    #[error("no valid samples remain after filtering ({rejected} rows rejected)")]
    EmptySeries { rejected: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdConvergence { sweeps: usize },

    #[error("no days survive the coverage filter ({dropped} dropped)")]
    NoDays { dropped: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical routines rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteObjective { .. } | Error::SvdConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
