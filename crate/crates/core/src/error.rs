use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs does not hold (shapes, ranges, counts).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The computation cannot produce a meaningful result for these inputs.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Non-finite value or failed factorization.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },
}

impl Error {
    /// True for failures caused by arithmetic rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Diverged { .. })
    }
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
