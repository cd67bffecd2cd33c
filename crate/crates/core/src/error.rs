use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("point ({x}, {y}) is outside the arena")]
    OutOfBounds { x: f64, y: f64 },

    #[error("could not place {robots} robots without overlap")]
    PlacementFailure { robots: usize },

    #[error("normalization constant must be non-zero")]
    ZeroNormalization,

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("malformed trajectory log: {0}")]
    TrajectoryFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
