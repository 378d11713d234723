use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("initialization failed for UAV {uav}: {reason}")]
    Initialization { uav: usize, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The simplex solver could not certify a solution. `iterate` holds the
    /// basic solution at the point of failure.
    #[error("linear program failed: {reason}")]
    Lp { reason: String, iterate: Vec<f64> },

    #[error("convex subproblem failed: {reason} (worst row `{worst_row}`, value {worst_value:e}, gap {gap:e})")]
    Subproblem {
        reason: String,
        worst_row: String,
        worst_value: f64,
        gap: f64,
        best_iterate: Vec<f64>,
    },

    #[error("instance too large for exhaustive enumeration: {candidates:e} candidates")]
    TooLarge { candidates: f64 },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
