use thiserror::Error;

pub type Result<T, E = MilpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("malformed model: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cannot build model: {0}")]
    Build(String),
    #[error("LP parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Core(#[from] signalflow_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
