use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("aggregation weights sum to zero")]
    ZeroWeightSum,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged: non-finite weight at index {index} (device {device:?})")]
    Diverged { index: usize, device: Option<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown access point {ap} in LAN {lan}")]
    UnknownAccessPoint { lan: usize, ap: usize },

    #[error("need at least {needed} members, got {got}")]
    TooFewMembers { needed: usize, got: usize },

    #[error("cannot split {samples} samples into {shards} shards")]
    InsufficientSamples { samples: usize, shards: usize },

    #[error("cannot sample {k} elements from a pool of {pool}")]
    SampleTooLarge { k: usize, pool: usize },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigField {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for errors that stem from a bad config or world description rather
    /// than from the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. } | Error::ConfigField { .. } | Error::Json(_)
        )
    }
}
