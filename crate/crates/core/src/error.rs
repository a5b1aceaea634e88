use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid dimension in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("SVD failed to converge for {rows}x{cols} matrix")]
    Decomposition { rows: usize, cols: usize },

    #[error("zero-norm row {item} in subject {subject}")]
    ZeroNorm { subject: usize, item: usize },

    #[error("bad magic bytes {found:02x?}, expected RAMX")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported RAMX version {0}")]
    Version(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("CSV parse error on line {line}: {detail}")]
    Csv { line: usize, detail: String },

    #[error("model format error: {0}")]
    Model(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("empty training set: {0}")]
    EmptyTrainingSet(&'static str),

    #[error("index {index} out of range for {len} items")]
    OutOfRange { index: usize, len: usize },

    #[error("{what} exceeds exhaustive-search cap {cap}")]
    SizeCap { what: &'static str, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
