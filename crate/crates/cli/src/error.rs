use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit status 2.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] gliofuse_core::Error),

    #[error(transparent)]
    Net(#[from] gliofuse_netkit::Error),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(gliofuse_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
