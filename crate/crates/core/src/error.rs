use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative density {value} in box {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("CFL condition violated: dt = {dt} exceeds the stable bound, use dt <= {suggested}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error(
        "kernel graph is disconnected at point {index}: increase epsilon (currently {epsilon})"
    )]
    DisconnectedKernel { index: usize, epsilon: f64 },

    #[error("expected a single independent coordinate, found {found:?}")]
    NotOneDimensional { found: Vec<usize> },

    #[error("duplicate chart coordinates for agents {first} and {second}")]
    DuplicateCoordinate { first: usize, second: usize },

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
