use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, AresError>;

/// Errors emitted by the evaluation engine.
#[derive(Debug, Error)]
pub enum AresError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("layer {index} ({kind}): {message}")]
    Layer {
        index: usize,
        kind: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model spec invalid: {0}")]
    InvalidSpec(String),

    #[error("target row {row} does not sum to 1 (sum = {sum})")]
    UnnormalizedTarget { row: usize, sum: f64 },

    #[error("bad magic bytes in weight/dataset file")]
    BadMagic,

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("baseline corruption error is zero for kind {0}, mCE undefined")]
    ZeroBaselineCe(String),

    #[error("training diverged (non-finite loss) at epoch {0}")]
    Diverged(usize),

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AresError {
    pub fn shape(context: impl Into<String>, expected: &[usize], got: &[usize]) -> Self {
        AresError::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
