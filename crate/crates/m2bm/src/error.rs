use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] m2bm_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Wav { path: PathBuf, source: hound::Error },

    /// Bad arguments, configs or inputs.
    #[error("{0}")]
    Usage(String),

    /// A run finished but its numerical acceptance check did not hold.
    #[error("{0}")]
    Check(String),
}

impl Error {
    /// 0 success, 1 usage or config error, 2 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(e) if e.is_numerical() => 2,
            Error::Check(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

macro_rules! usage {
    ($($arg:tt)*) => {
        $crate::error::Error::Usage(format!($($arg)*))
    };
}
pub(crate) use usage;
