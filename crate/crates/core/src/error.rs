use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("series too short: need at least {min_len} timepoints, got {len}")]
    SeriesTooShort { len: usize, min_len: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("layer {layer}: {message}")]
    Construction { layer: usize, message: String },

    #[error("layer {layer}: {kind} layers are not implemented")]
    UnimplementedLayer { layer: usize, kind: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("infeasible template: {0}")]
    InfeasibleTemplate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
