use thiserror::Error;

/// Errors raised anywhere in the completion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },

    #[error("mode {mode} out of range for a {order}-mode tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sparse tensors do not share the same support")]
    SupportMismatch,

    #[error("duplicate coordinate {0:?}")]
    DuplicateIndex(Vec<usize>),

    #[error("invalid dims: {0}")]
    InvalidDims(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("retraction step is degenerate (U + xi = 0)")]
    DegenerateStep,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("conjugate gradients failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidDims(_) => 2,
            Error::IndexOutOfRange { .. }
            | Error::DuplicateIndex(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::SupportMismatch
            | Error::Shape(_)
            | Error::ModeOutOfRange { .. } => 3,
            Error::NonFinite(_)
            | Error::DegenerateStep
            | Error::Solver(_)
            | Error::UndefinedMetric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
