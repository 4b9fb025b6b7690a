use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected {expected} input channels, got {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("kernel {kernel:?} does not fit padded input {padded:?}")]
    KernelTooLarge { kernel: [usize; 3], padded: [usize; 3] },
    #[error("spatial dims {dims:?} are not divisible by {factor}")]
    Indivisible { dims: [usize; 3], factor: usize },
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
}
