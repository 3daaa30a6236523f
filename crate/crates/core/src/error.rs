use std::path::PathBuf;

/// Errors raised anywhere in the benchtop.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("negative expected count {value} at pixel {index}")]
    NegativeExpectation { index: usize, value: f64 },

    #[error("degenerate cutout: all {len} pixels equal {value}")]
    DegenerateCutout { len: usize, value: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("feature stage mismatch: expected {expected:?}, got {got:?}")]
    Stage {
        expected: crate::preprocess::Stage,
        got: crate::preprocess::Stage,
    },

    #[error("unsupported Matern smoothness nu = {0} (need integer, half-integer or infinity)")]
    UnsupportedNu(f64),

    #[error(
        "kernel factorization failed (n = {size}, jitter reached {jitter:e}, \
         min diagonal {min_diag:e}, max diagonal {max_diag:e})"
    )]
    Factorization {
        size: usize,
        jitter: f64,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("non-finite loss {loss} at iteration {iteration}: {context}")]
    NonFiniteLoss {
        loss: f64,
        iteration: usize,
        context: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fewer values ({values}) than bins ({bins})")]
    TooFewValues { values: usize, bins: usize },

    #[error("corrupt dataset at {path}: {reason}")]
    CorruptDataset { path: PathBuf, reason: String },

    #[error("bad model file: {0}")]
    ModelFormat(String),

    #[error("output directory {0} exists and is not empty (use --force)")]
    OutputExists(PathBuf),

    #[error("unknown parameter '{name}' for model {model}; valid: {valid}")]
    UnknownParameter {
        model: String,
        name: String,
        valid: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
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
