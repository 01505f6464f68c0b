use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No stationary policy meets every constraint with positive margin.
    #[error("slackness violated: maximal uniform slack is {xi_star} (must be > 0)")]
    Slackness { xi_star: f64 },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("linear program: {0}")]
    LinearProgram(String),

    /// A deterministic per-path law failed. Carries what is needed to replay the path.
    #[error("invariant violated on path seed {seed} at slot {slot}: {what}")]
    InvariantViolation { seed: u64, slot: usize, what: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
