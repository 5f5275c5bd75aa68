use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the attribution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("unsupported png format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("gray-level mismatch: image has {image} levels, config expects {config}")]
    LevelMismatch { image: usize, config: usize },

    #[error("no valid pixel pairs for offset ({dx}, {dy}) on a {width}x{height} image")]
    NoValidPairs {
        dx: i32,
        dy: i32,
        width: usize,
        height: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("latent dimension {k} out of range (max {max})")]
    LatentDimOutOfRange { k: usize, max: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples have zero spread; supply an explicit bandwidth")]
    ZeroSpread,

    #[error("non-finite sample value")]
    NonFiniteSample,

    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    AlphaOutOfRange(f64),

    #[error("calibration and evaluation corpora overlap ({count} shared ids, e.g. {example})")]
    CorpusOverlap { count: usize, example: String },

    #[error("threshold was fitted for backend {expected}, not {actual}")]
    BackendMismatch { expected: String, actual: String },

    #[error(
        "threshold model carries no raw-ratio samples; recalibrate to evaluate without calibration"
    )]
    MissingRawSamples,

    #[error("expected {expected} reconstruct calls, backend saw {actual}")]
    CallCount { expected: usize, actual: usize },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("unsupported schema: {0}")]
    Schema(String),

    #[error("external backend: {0}")]
    Transport(String),

    #[error("external backend timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("adapter rejected request: {0}")]
    Adapter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
