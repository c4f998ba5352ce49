use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid helix parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot fit {k} clusters to {n} points")]
    TooFewPoints { k: usize, n: usize },

    #[error("turn {turn} has {size} points, fewer than k = {k}")]
    UndersizedTurn { turn: usize, size: usize, k: usize },

    #[error("label {label} out of range for {centers} centers")]
    LabelOutOfRange { label: usize, centers: usize },

    #[error("point {index} has no ground-truth helix coordinates; verticality needs a synthetic cloud (see `vclust generate`)")]
    MissingTruth { index: usize },

    #[error("{points} points cannot be split into sections of {per_section}")]
    NotDivisible { points: usize, per_section: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
