use thiserror::Error;

use crate::io::ArchiveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: levels = {levels}, radius = {radius} (need levels >= 2 and radius > 0)")]
    InvalidAlphabet { levels: usize, radius: f64 },

    /// The per-layer radius rule produced zero, e.g. an all-zero weight matrix.
    #[error("degenerate alphabet: radius computed from weights is {radius}")]
    DegenerateAlphabet { radius: f64 },

    #[error("empty weight matrix")]
    EmptyWeights,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("exhaustive search over {count} codes exceeds the limit of {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("slope fit: {0}")]
    Fit(String),

    #[error("data matrix has numerical rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error(transparent)]
    Archive(#[from] ArchiveError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
