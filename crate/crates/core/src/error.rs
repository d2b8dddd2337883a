use thiserror::Error;

/// Crate-wide error type. Variants are grouped by how callers should react:
/// everything except `ResourceLimit` and `Io` is a problem with the inputs.
#[derive(Debug, Error)]
pub enum Error {
    /// Two arguments that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A precondition on a value failed (ranges, orderings, singular inputs).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configured budget (cell count, pair count, path count) would be exceeded.
    /// Raising the budget is an explicit caller decision, never automatic.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// The constraint set of an optimization problem is empty.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// The requested combination of parameters is outside the supported regime.
    #[error("unsupported regime: {0}")]
    Unsupported(String),

    /// Config validation. Collects every problem found, not just the first.
    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    /// 2 = input/validation problem, 3 = resource cap, 1 = everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::ResourceLimit(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
