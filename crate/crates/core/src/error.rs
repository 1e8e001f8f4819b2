use thiserror::Error;

use crate::solver::FitResult;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {index} of covariate block {block} has zero variance")]
    ConstantColumn { block: char, index: usize },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("penalty evaluated on an empty vector")]
    EmptyVector,

    #[error("vector must be nonzero")]
    ZeroVector,

    #[error("operation requires a symmetric problem with p1 == p2 (got p1={p1}, p2={p2})")]
    NotSymmetricProblem { p1: usize, p2: usize },

    #[error("ADMM did not converge in {} iterations (r={:.3e}, s={:.3e})", .0.iterations, .0.r_final, .0.s_final)]
    NotConverged(Box<FitResult>),

    #[error("grid point {index}: {source}")]
    GridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("inner degrees-of-freedom matrix is singular (condition estimate {condition:.3e})")]
    SingularInnerMatrix { condition: f64 },

    #[error("logistic model requires a 0/1 response")]
    NonBinaryResponse,

    #[error("scenario asks for {requested} interactions but only {available} hereditary pairs exist")]
    InfeasibleScenario { requested: usize, available: usize },

    #[error("monte carlo df needs at least 10 replicates (got {0})")]
    TooFewReplicates(usize),

    #[error("column '{0}' not found in data header")]
    MissingColumn(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_mismatch(
    what: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::ShapeMismatch {
        what,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
