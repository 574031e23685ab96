//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("sample-rate mismatch: {a} Hz vs {b} Hz")]
    RateMismatch { a: u32, b: u32 },

    #[error("length mismatch: {a} vs {b}")]
    LenMismatch { a: usize, b: usize },

    #[error("step order: target time t={t} must not exceed source time s={s}")]
    StepOrder { s: f64, t: f64 },

    #[error("singularity: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("silent signal: {0}")]
    SilentSignal(String),

    #[error("unstable filter design: {0}")]
    UnstableFilter(String),

    #[error("WAV parse error at byte {offset}: {msg}")]
    WavParse { offset: u64, msg: String },

    #[error("unsupported WAV codec: format tag {tag}")]
    UnsupportedCodec { tag: u16 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("bad checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: {term} is not finite")]
    TrainDiverged { step: usize, term: String },

    #[error("gradient pre-flight failed: max relative error {err:.3e} exceeds {tol:.1e}")]
    GradCheckFailed { err: f64, tol: f64 },

    #[error("unknown fine-tune variant {0:?} (expected Cont, R, RH, RAF, RHAF, or RHAF-B)")]
    UnknownVariant(String),

    #[error("stage order: {stage} requires artifacts from `{required}` (missing {path})")]
    StageOrder {
        stage: String,
        required: String,
        path: String,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
