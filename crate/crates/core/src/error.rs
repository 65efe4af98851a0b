use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid roi: {0}")]
    InvalidRoi(String),

    /// A channel (or derived projection) has no variation to work with.
    #[error("degenerate channel {channel}: {reason}")]
    DegenerateChannel { channel: String, reason: String },

    #[error("band contains {bins} spectrum bins, at least 3 are required")]
    BandTooNarrow { bins: usize },

    #[error("signal of {len} samples is too short, need more than {required}")]
    SignalTooShort { len: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("manifest entry {index}: missing or invalid field `{field}`")]
    ManifestField { field: String, index: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("truncated video: expected {expected} bytes, found {actual}")]
    TruncatedVideo { expected: u64, actual: u64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid synthesis spec: {0}")]
    Spec(String),

    #[error("no windows could be evaluated: {0}")]
    EmptyEvaluation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn degenerate(channel: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::DegenerateChannel {
            channel: channel.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
