use thiserror::Error;

/// Errors produced by the clustering engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate component {component}: {detail}")]
    DegenerateCluster { component: usize, detail: String },
    #[error("numerical failure in component {component}: {detail}")]
    Numerical { component: usize, detail: String },
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("selection failed: every grid cell failed to fit")]
    SelectionFailed,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
