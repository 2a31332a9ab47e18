use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error in series `{id}` at t={t}: {msg}")]
    Domain { id: String, t: usize, msg: String },

    #[error("domain error: {0}")]
    OutOfSupport(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("integrity error in `{id}`: {msg}")]
    Integrity { id: String, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerics error: {0}")]
    Numerics(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}, series {series}, window end {window_end}")]
    TrainingDiagnostic {
        epoch: usize,
        batch: usize,
        series: String,
        window_end: usize,
    },

    #[error("rank-deficient design: column(s) {columns:?} are collinear with earlier columns")]
    Design { columns: Vec<String> },

    #[error("every series was flagged for {0}; nothing to aggregate")]
    EmptyAggregate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
