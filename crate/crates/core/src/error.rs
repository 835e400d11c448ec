use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("Laplace identity failed: error {error:e} at lambda = {worst_lambda} (tolerance {tolerance:e})")]
    IdentityCheck {
        worst_lambda: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("singular shifted solve at shift {shift}")]
    SingularSolve { shift: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for usage problems, 3 for numerical diagnostics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidGrid(_)
            | Error::InvalidInput(_)
            | Error::LengthMismatch { .. }
            | Error::Config(_)
            | Error::UnknownScenario(_)
            | Error::Json(_) => 2,
            Error::Io(_) | Error::Csv(_) => 2,
            Error::NonFinite { .. }
            | Error::NoConvergence { .. }
            | Error::Quadrature(_)
            | Error::IdentityCheck { .. }
            | Error::SingularSolve { .. }
            | Error::Overflow(_) => 3,
        }
    }
}

impl Error {
    /// Copy of a cached error; I/O and parse errors keep only their message.
    pub fn replicate(&self) -> Error {
        match self {
            Error::InvalidModel(s) => Error::InvalidModel(s.clone()),
            Error::InvalidGrid(s) => Error::InvalidGrid(s.clone()),
            Error::InvalidInput(s) => Error::InvalidInput(s.clone()),
            Error::LengthMismatch { expected, found } => Error::LengthMismatch {
                expected: *expected,
                found: *found,
            },
            Error::NonFinite { what, index } => Error::NonFinite { what, index: *index },
            Error::NoConvergence { index, iterations } => Error::NoConvergence {
                index: *index,
                iterations: *iterations,
            },
            Error::Quadrature(s) => Error::Quadrature(s.clone()),
            Error::IdentityCheck {
                worst_lambda,
                error,
                tolerance,
            } => Error::IdentityCheck {
                worst_lambda: *worst_lambda,
                error: *error,
                tolerance: *tolerance,
            },
            Error::SingularSolve { shift } => Error::SingularSolve { shift: *shift },
            Error::Overflow(s) => Error::Overflow(s.clone()),
            Error::Config(s) => Error::Config(s.clone()),
            Error::UnknownScenario(s) => Error::UnknownScenario(s.clone()),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), e.to_string())),
            Error::Json(e) => Error::Config(e.to_string()),
            Error::Csv(e) => Error::Config(e.to_string()),
        }
    }
}
