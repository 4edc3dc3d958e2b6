use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("ill-conditioned: {0}")]
    Conditioning(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::EmptySet(_) | Error::Conditioning(_) => 1,
            Error::Size(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::input(format!(
            "dimension mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}
