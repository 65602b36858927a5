use thiserror::Error;

/// Error type shared across the whole crate.
#[derive(Error, Debug)]
pub enum SmpError {
    #[error("size mismatch: expected {expected} values, got {got}")]
    Size { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid argument: {0}")]
    Arg(String),
    #[error("spatial extent {extent} not divisible by window {window}")]
    Divisibility { extent: usize, window: usize },
    #[error("split metadata inconsistent: {0}")]
    Meta(String),
    #[error("sample location out of window: {0}")]
    Location(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("validity error: {0}")]
    Validity(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SmpError>;
