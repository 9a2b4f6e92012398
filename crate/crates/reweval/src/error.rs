//! Error type shared by every module of the crate.

use crate::ids::{ItemId, UserId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A text input (log CSV or scenario config) failed to parse.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("user {0} is not in the snapshot")]
    UnknownUser(UserId),

    #[error("item {item} is not in the profile of user {user}")]
    ItemNotInProfile { user: UserId, item: ItemId },

    #[error("external item id {0} does not occur in the log")]
    UnknownItem(u64),

    #[error("weight {weight} for item {item} is not positive")]
    NonPositiveWeight { item: ItemId, weight: f64 },

    #[error("snapshot at day {0} has no events")]
    EmptySnapshot(u32),

    #[error("invalid user probabilities: {0}")]
    InvalidUserProbs(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("constant recommender needs {needed} distinct items, got {got}")]
    TooFewItems { needed: usize, got: usize },

    #[error("reference item {0} has zero probability under the weighted marginal")]
    SupportViolation(ItemId),

    #[error("reference marginal and snapshot have no items in common")]
    DisjointReference,

    #[error("unknown algorithm spec '{0}'")]
    UnknownAlgorithm(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
