use thiserror::Error;

/// Errors raised by the library. Verification outcomes are not errors; they are
/// carried in report structs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("column {column} has norm {norm}, expected unit norm")]
    NonUnitColumn { column: usize, norm: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPositiveSemidefinite(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codebook degenerate: L = {0} < 2")]
    DegenerateCodebook(u64),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("gave up after {0} attempts")]
    AttemptsExhausted(usize),

    #[error("ensemble failed verification: {0}")]
    VerificationFailed(String),

    #[error("enumeration budget exceeded: {needed} supports > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("no crossing found in the searched range")]
    NoCrossing,

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
