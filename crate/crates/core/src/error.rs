use thiserror::Error;

use crate::behavior::NoSignalingWitness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario too large: {what} would need {count} objects (limit {limit})")]
    ScenarioTooLarge {
        what: &'static str,
        count: u128,
        limit: u128,
    },

    #[error("too many orderings: {parties} parties (limit {limit})")]
    TooManyOrders { parties: usize, limit: usize },

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("behavior is signaling: {0}")]
    NotNoSignaling(NoSignalingWitness),

    #[error("operation requires {expected}, got {found}")]
    WrongScenario { expected: &'static str, found: String },

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("party {0} has already been queried this round")]
    DuplicateQuery(usize),

    #[error("forcing policies are unavailable in upgraded mode")]
    PolicyUnavailable,

    #[error("unknown variable selector `{0}`")]
    UnknownSelector(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
