use std::path::PathBuf;

use thiserror::Error;

/// Failures while loading or validating an app bundle.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("component {component} references missing class {class}")]
    Link { component: String, class: String },

    #[error("{file}: text is not valid UTF-8 ({detail})")]
    Encoding { file: String, detail: String },

    #[error("malformed method {method}: {msg}")]
    MalformedMethod { method: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn parse(file: &str, line: usize, msg: impl Into<String>) -> Self {
        ModelError::Parse {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short kind label used in report rows.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::Parse { .. } => "ParseError",
            ModelError::Link { .. } => "LinkError",
            ModelError::Encoding { .. } => "EncodingError",
            ModelError::MalformedMethod { .. } => "MalformedMethod",
            ModelError::Io { .. } => "IoError",
        }
    }
}
