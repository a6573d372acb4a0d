use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One entry per violated invariant.
    #[error("invalid input: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("admissible set has {states} states, above the enumeration limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("admissible set is empty")]
    EmptyAdmissibleSet,

    #[error("no type-{k} users on plan {plan}; the per-user steady-state value is undefined")]
    EmptyCell { k: usize, plan: usize },

    #[error("no online subscribers to measure throughput for")]
    NoOnlineUsers,

    #[error("throughput must be positive, got {0}")]
    NonPositiveThroughput(f64),

    #[error("{what} requires {needs}")]
    Unsupported { what: &'static str, needs: &'static str },

    #[error("no exact collapse at q >= 0: {0}")]
    NoExactCollapse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(vec![msg.into()])
    }
}
