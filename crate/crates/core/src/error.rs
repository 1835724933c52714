use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("registry not found: {}", .0.display())]
    RegistryNotFound(PathBuf),

    #[error("invalid antenna registry: {0}")]
    Registry(String),

    #[error("corrupt input: {rejected} of {rows} rows rejected (threshold {threshold})")]
    CorruptInput {
        rows: u64,
        rejected: u64,
        threshold: f64,
    },

    #[error("unknown antenna `{0}`")]
    UnknownAntenna(String),

    #[error("unknown zone `{0}`")]
    UnknownZone(String),

    #[error("unknown municipality `{0}`")]
    UnknownMunicipality(String),

    #[error("matrix labels differ")]
    LabelMismatch,

    #[error("malformed matrix: {0}")]
    Matrix(String),

    #[error("activities are not contiguous at position {0}")]
    NonContiguous(usize),

    #[error("degenerate rank vector: {0}")]
    DegenerateRanks(&'static str),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed journey record: {0}")]
    Journey(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
