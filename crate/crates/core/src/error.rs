use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("chain is not ergodic ({kind}): residual {residual:.3e} after {iterations} iterations")]
    NonErgodic {
        kind: NonErgodicKind,
        residual: f64,
        iterations: usize,
    },

    #[error("chain did not mix within {t_cap} steps (worst TV distance {tv:.3e})")]
    NonMixing { t_cap: usize, tv: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver returned non-optimal status {status:?}: {detail}")]
    Solver { status: crate::solver::SolveStatus, detail: String },
}

/// Classification of a failed stationary-distribution computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonErgodicKind {
    /// Residual oscillates while the running average settles.
    Periodic,
    /// Different starting points settle on different fixed points.
    Reducible,
    /// Neither signature was detected within the iteration budget.
    Unknown,
}

impl std::fmt::Display for NonErgodicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NonErgodicKind::Periodic => write!(f, "periodic"),
            NonErgodicKind::Reducible => write!(f, "reducible"),
            NonErgodicKind::Unknown => write!(f, "unknown"),
        }
    }
}

pub type Result<T> = std::result::Result<T, ExploreError>;
