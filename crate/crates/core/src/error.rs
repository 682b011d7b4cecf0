use thiserror::Error;

/// Errors surfaced by the localization pipeline.
#[derive(Debug, Error)]
pub enum AssgError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("backward pass requires a scalar (1x1) loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: String, value: f64 },

    #[error("corpus generation failed: {0}")]
    Generation(String),

    #[error("format error in {path} at offset {offset}: {reason}")]
    Format {
        path: String,
        offset: u64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl AssgError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        AssgError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        AssgError::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AssgError>;
