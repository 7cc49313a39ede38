use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty matrix")]
    EmptyMatrix,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient BS antennas for BD: {0}")]
    BdInfeasible(String),

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("retraction singularity at entry {0}")]
    RetractionSingularity(usize),

    #[error("beamformer product has zero norm, cannot normalize power")]
    ZeroPower,

    #[error("not enough paths: {0}")]
    NotEnoughPaths(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
