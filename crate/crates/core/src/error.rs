use thiserror::Error;

/// Errors raised while building, validating or solving satisficing models.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong dimensions, parameters out of range, invalid data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A cone type or loss that the requested path cannot handle.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The backend did not return a usable solution.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The target lies below the empirical optimum, so no solution can exist.
    #[error("target too low: tau = {tau} but the empirical optimum is {z0}")]
    TargetTooLow { tau: f64, z0: f64 },

    /// The casting constant is smaller than the perspective depth of the loss.
    #[error("casting constant P = {p} is below the perspective depth {depth}")]
    PenaltyBelowDepth { p: f64, depth: f64 },

    /// Something that the theory guarantees did not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::TargetTooLow { .. }
            | Error::PenaltyBelowDepth { .. }
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::Unsupported(_) => 3,
            Error::Solver(_) | Error::Invariant(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
