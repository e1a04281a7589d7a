use thiserror::Error;

/// Errors produced by the identification engine and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("feature set is rank deficient: design still singular after {pulls} pulls (rank {rank} < {dim})")]
    RankDeficient { pulls: usize, rank: usize, dim: usize },

    #[error("maximum-likelihood fit did not converge after {iterations} iterations (score norm {score_norm:e})")]
    MleNotConverged {
        iterations: usize,
        score_norm: f64,
        best: Vec<f64>,
    },

    #[error("Hessian of the log-likelihood is singular")]
    SingularHessian,

    #[error("direction is not in the span of the arm features (phase-1 residual {residual:e})")]
    InfeasibleDirection { residual: f64 },

    #[error("simplex did not terminate within {0} pivots")]
    SimplexIterationLimit(usize),

    #[error("arm index {arm} out of range for {num_arms} arms")]
    InvalidArm { arm: usize, num_arms: usize },

    #[error("environment has no ground truth (features-only instance)")]
    NoGroundTruth,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
