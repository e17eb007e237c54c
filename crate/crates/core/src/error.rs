use thiserror::Error;

/// Errors raised by the analytic, simulation and reconstruction routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("tail sum diverges: {0}")]
    DivergentTail(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconsistent occupation field: {0}")]
    InconsistentOccupationField(String),

    #[error("stack underflow at state {state} (depth {depth})")]
    StackUnderflow { state: u32, depth: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("inconsistent stacks: {0}")]
    InconsistentStacks(String),
}

impl Error {
    /// Stable kebab-case identifier used in machine-readable error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidProfile(_) => "invalid-profile",
            Error::DivergentTail(_) => "divergent-tail",
            Error::OutOfRange(_) => "out-of-range",
            Error::InvalidArguments(_) => "invalid-arguments",
            Error::InvalidInput(_) => "invalid-input",
            Error::NumericFailure(_) => "numeric-failure",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InconsistentOccupationField(_) => "inconsistent-occupation-field",
            Error::StackUnderflow { .. } => "stack-underflow",
            Error::InvalidPermutation(_) => "invalid-permutation",
            Error::InconsistentStacks(_) => "inconsistent-stacks",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
