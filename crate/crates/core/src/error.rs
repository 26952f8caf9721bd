use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("index error: {0}")]
    Index(String),

    #[error("malformed {file}{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format {
        file: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("dataset too small: {0}")]
    Size(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
